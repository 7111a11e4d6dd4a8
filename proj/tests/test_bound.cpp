#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qvsweep/bound.hpp"
#include "test_util.hpp"

using namespace qvs;

namespace {

BoundParams params(double p = 2.0, double eps_interp = 0.1, double eps_smooth = 0.01) {
  BoundParams bp;
  bp.alpha = 1.0;
  bp.eps_interp = eps_interp;
  bp.eps_smooth = eps_smooth;
  bp.p = p;
  return bp;
}

}  // namespace

TEST_CASE("smooth max blend") {
  CHECK(smooth_max(0.0, 0.2) == doctest::Approx(0.1).epsilon(1e-15));
  // analytic gap bound eps^2/(4x) plus rounding slack at magnitude x
  const double ulp_slack = 16.0 * std::numeric_limits<double>::epsilon() * 10.0;
  CHECK(smooth_max(10.0, 1e-3) == doctest::Approx(10.0).epsilon(2.5e-9));
  CHECK(std::abs(smooth_max(10.0, 1e-3) - 10.0) <= 2.5e-8 + ulp_slack);
  CHECK(smooth_max_d1(0.0, 0.3) == doctest::Approx(0.5).epsilon(1e-15));

  // dominates max(0,x) and stays within eps/2
  for (double x : {-3.0, -0.5, 0.0, 0.2, 4.0}) {
    const double v = smooth_max(x, 0.1);
    CHECK(v >= std::max(0.0, x));
    CHECK(v - std::max(0.0, x) <= 0.05 + 1e-15);
  }

  // derivative consistency
  for (double x : {-1.0, -0.01, 0.0, 0.3, 2.0}) {
    const double h = 1e-6;
    const double fd = (smooth_max(x + h, 0.1) - smooth_max(x - h, 0.1)) / (2 * h);
    CHECK(smooth_max_d1(x, 0.1) == doctest::Approx(fd).epsilon(1e-7));
    const double fd2 = (smooth_max_d1(x + h, 0.1) - smooth_max_d1(x - h, 0.1)) / (2 * h);
    CHECK(smooth_max_d2(x, 0.1) == doctest::Approx(fd2).epsilon(1e-5));
  }
}

TEST_CASE("piecewise bound map branches") {
  const Grid g = Grid::line(1);
  const BoundParams bp = params();

  // support with |grad z| = 3: z = -1.5 gives d1 = (0 - z)/0.5 = 3
  Field z(1);
  z << -1.5;
  Field w(1);

  w[0] = z[0] + 0.2;  // above the band
  CHECK(bound_continuous(g, w, z, bp)[0] == doctest::Approx(1.0).epsilon(1e-15));

  w[0] = z[0];  // at the support
  CHECK(bound_continuous(g, w, z, bp)[0] == doctest::Approx(3.0).epsilon(1e-15));

  w[0] = z[0] + 0.05;  // halfway through the band: (3 + 1)/2
  CHECK(bound_continuous(g, w, z, bp)[0] == doctest::Approx(2.0).epsilon(1e-13));

  w[0] = z[0] - 0.3;  // below the support clamps to the support branch
  CHECK(bound_continuous(g, w, z, bp)[0] == doctest::Approx(3.0).epsilon(1e-15));

  // flat support: max(alpha, 0) = alpha
  Field flat = Field::Zero(1);
  CHECK(bound_continuous(g, flat, flat, bp)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("smoothed bound value") {
  const Grid g = build_grid(3, 3);
  const BoundParams bp = params(kInfNorm);
  auto rng = testutil::make_rng(11);

  // far above the band the bound is exactly alpha
  const Field z = testutil::random_field(rng, g.size(), 0.3);
  const Field w = z.array() + 1.0;
  const Field m = bound_smooth(g, w, z, bp);
  for (int i = 0; i < g.size(); ++i) CHECK(m[i] == doctest::Approx(bp.alpha).epsilon(1e-15));

  // flat support at the support level: alpha within eps_smooth
  const Field zero = Field::Zero(g.size());
  const Field m0 = bound_smooth(g, zero, zero, bp);
  for (int i = 0; i < g.size(); ++i) {
    CHECK(m0[i] >= bp.alpha);
    CHECK(m0[i] <= bp.alpha + bp.eps_smooth);
  }

  // never below alpha
  for (int trial = 0; trial < 20; ++trial) {
    const Field zz = testutil::random_field(rng, g.size());
    const Field ww = testutil::random_field(rng, g.size());
    const Field mm = bound_smooth(g, ww, zz, bp);
    for (int i = 0; i < g.size(); ++i) CHECK(mm[i] >= bp.alpha - 1e-14);
  }
}

TEST_CASE("smoothed bound derivative channels match finite differences") {
  for (double p : {2.0, kInfNorm, 3.0}) {
    const Grid g = build_grid(3, 2);
    const BoundParams bp = params(p, 0.37, 0.05);
    auto rng = testutil::make_rng(17 + static_cast<int>(p * 10));
    for (int trial = 0; trial < 12; ++trial) {
      const Field z = testutil::random_field(rng, g.size(), 0.4);
      // keep a mix of band and off-band nodes
      Field w = z + testutil::random_uniform_field(rng, g.size(), -0.2, 0.6);
      const SmoothBoundEval ev = bound_smooth_eval(g, w, z, bp);

      for (int i = 0; i < g.size(); ++i) {
        const double fdw = testutil::fd_partial(
            [&](const Field& wx) { return bound_smooth(g, wx, z, bp)[i]; }, w, i);
        CHECK(ev.dw[i] == doctest::Approx(fdw).epsilon(1e-5));
      }

      const Eigen::MatrixXd jz = bound_smooth_z_jacobian(g, ev);
      for (int i = 0; i < g.size(); ++i) {
        for (int jcol = 0; jcol < g.size(); ++jcol) {
          const double fdz = testutil::fd_partial(
              [&](const Field& zx) { return bound_smooth(g, w, zx, bp)[i]; }, z, jcol);
          CHECK(jz(i, jcol) == doctest::Approx(fdz).epsilon(2e-5).scale(1.0));
        }
      }

      // second derivatives in w and the w-z cross channel; z_i moves both the
      // band coordinate and its own gradient entries
      for (int i = 0; i < g.size(); ++i) {
        const double fdww = testutil::fd_partial(
            [&](const Field& wx) { return bound_smooth_eval(g, wx, z, bp).dw[i]; }, w, i, 1e-5);
        CHECK(ev.dww[i] == doctest::Approx(fdww).epsilon(1e-4).scale(1.0));
        const double fdwz = testutil::fd_partial(
            [&](const Field& zx) { return bound_smooth_eval(g, w, zx, bp).dw[i]; }, z, i, 1e-5);
        const double expect = ev.dwz_direct[i] - ev.dwd1[i] / g.hx - ev.dwd2[i] / g.hy;
        CHECK(expect == doctest::Approx(fdwz).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("smoothing width controls the gap to the piecewise map off the band") {
  const Grid g = build_grid(4, 4);
  auto rng = testutil::make_rng(23);
  const Field z = testutil::random_field(rng, g.size(), 0.4);
  // off-band states: far above, at, and below the support
  std::vector<Field> probes;
  probes.push_back(z.array() + 1.0);
  probes.push_back(z);
  probes.push_back(z.array() - 0.5);

  const double frozen_c = 2.0;  // regression constant
  for (double p : {2.0, kInfNorm}) {
    for (double es : {1e-2, 1e-3, 1e-4}) {
      BoundParams bp = params(p, 0.1, es);
      for (const Field& w : probes) {
        const Field exact = bound_continuous(g, w, z, bp);
        const Field smooth = bound_smooth(g, w, z, bp);
        CHECK((smooth - exact).lpNorm<Eigen::Infinity>() <= frozen_c * es);
      }
    }
  }
}
