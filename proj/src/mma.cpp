#include "mctopo/mma.hpp"

#include <algorithm>
#include <cmath>

#include "mctopo/error.hpp"

namespace mctopo::mma {

void MmaSettings::validate() const {
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw Error(ErrorKind::Config, "mma move_limit must be in (0, 1]");
  if (!(asy_init > 0.0 && asy_init <= 1.0)) throw Error(ErrorKind::Config, "mma asy_init must be in (0, 1]");
  if (!(asy_decr > 0.0 && asy_decr < 1.0)) throw Error(ErrorKind::Config, "mma asy_decr must be in (0, 1)");
  if (!(asy_incr >= 1.0)) throw Error(ErrorKind::Config, "mma asy_incr must be >= 1");
  if (!(albefa > 0.0 && albefa < 1.0)) throw Error(ErrorKind::Config, "mma albefa must be in (0, 1)");
  if (!(raa0 > 0.0)) throw Error(ErrorKind::Config, "mma raa0 must be > 0");
  if (!(dual_tol > 0.0)) throw Error(ErrorKind::Config, "mma dual_tol must be > 0");
}

MmaState::MmaState(Eigen::VectorXd xmin, Eigen::VectorXd xmax, MmaSettings settings)
    : s_(settings), xmin_(std::move(xmin)), xmax_(std::move(xmax)) {
  s_.validate();
  if (xmin_.size() != xmax_.size() || xmin_.size() == 0)
    throw Error(ErrorKind::InvalidInput, "mma bounds must be non-empty and of equal length");
  if (!((xmax_ - xmin_).array() > 0.0).all()) throw Error(ErrorKind::InvalidInput, "mma needs xmin < xmax");
}

namespace {

struct Terms {
  Eigen::ArrayXd p0, q0, p1, q1;
  double b = 0.0;
};

}  // namespace

Eigen::VectorXd MmaState::update(const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& df0, double f1,
                                 const Eigen::VectorXd& df1) {
  const Eigen::Index n = xmin_.size();
  if (x.size() != n || df0.size() != n || df1.size() != n)
    throw Error(ErrorKind::InvalidInput, "mma input length mismatch");
  if (!std::isfinite(f0) || !std::isfinite(f1) || !df0.allFinite() || !df1.allFinite() || !x.allFinite())
    throw Error(ErrorKind::RejectedIterate, "non-finite objective, constraint or gradient");
  if (((x - xmin_).array() < 0.0).any() || ((xmax_ - x).array() < 0.0).any())
    throw Error(ErrorKind::RejectedIterate, "design outside its bounds");

  const Eigen::ArrayXd range = (xmax_ - xmin_).array();
  const Eigen::ArrayXd xa = x.array();
  ++iter_;

  // Asymptotes.
  if (iter_ <= 2) {
    low_ = (xa - s_.asy_init * range).matrix();
    upp_ = (xa + s_.asy_init * range).matrix();
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double osc = (x[j] - x_prev_[j]) * (x_prev_[j] - x_prev2_[j]);
      const double g = osc < 0.0 ? s_.asy_decr : s_.asy_incr;
      low_[j] = x[j] - g * (x_prev_[j] - low_[j]);
      upp_[j] = x[j] + g * (upp_[j] - x_prev_[j]);
      low_[j] = std::clamp(low_[j], x[j] - 10.0 * range[j], x[j] - 0.01 * range[j]);
      upp_[j] = std::clamp(upp_[j], x[j] + 0.01 * range[j], x[j] + 10.0 * range[j]);
    }
  }
  const Eigen::ArrayXd L = low_.array(), U = upp_.array();

  alpha_ = xmin_.array().max(L + s_.albefa * (xa - L)).max(xa - s_.move_limit * range).matrix();
  beta_ = xmax_.array().min(U - s_.albefa * (U - xa)).min(xa + s_.move_limit * range).matrix();

  Terms t;
  const Eigen::ArrayXd ux2 = (U - xa).square(), xl2 = (xa - L).square();
  auto pq = [&](const Eigen::VectorXd& df, Eigen::ArrayXd& p, Eigen::ArrayXd& q) {
    const Eigen::ArrayXd pos = df.array().max(0.0), neg = (-df.array()).max(0.0);
    const Eigen::ArrayXd reg = s_.raa0 / range;
    p = ux2 * (1.001 * pos + 0.001 * neg + reg);
    q = xl2 * (0.001 * pos + 1.001 * neg + reg);
  };
  pq(df0, t.p0, t.q0);
  pq(df1, t.p1, t.q1);
  // Approximation of f1 at x equals f1: r = f1 - sum(p/(U-x) + q/(x-L)); constraint sum(...) <= -r.
  t.b = (t.p1 / (U - xa) + t.q1 / (xa - L)).sum() - f1;

  const Eigen::ArrayXd al = alpha_.array(), be = beta_.array();
  auto x_of = [&](double lam) {
    const Eigen::ArrayXd sp = (t.p0 + lam * t.p1).sqrt(), sq = (t.q0 + lam * t.q1).sqrt();
    return Eigen::ArrayXd(((sp * L + sq * U) / (sp + sq)).max(al).min(be));
  };
  auto g_of = [&](const Eigen::ArrayXd& xx) { return (t.p1 / (U - xx) + t.q1 / (xx - L)).sum() - t.b; };

  double lam = 0.0;
  Eigen::ArrayXd xn = x_of(0.0);
  double g = g_of(xn);
  if (g > 0.0) {
    // g(lambda) is non-increasing; bracket then bisect.
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (g_of(x_of(hi)) > 0.0 && grow < 200) {
      lo = hi;
      hi *= 2.0;
      ++grow;
    }
    for (int it = 0; it < 300; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const Eigen::ArrayXd xm = x_of(mid);
      const double gm = g_of(xm);
      if (gm > 0.0) lo = mid; else hi = mid;
      if (std::abs(gm) <= s_.dual_tol * (1.0 + std::abs(t.b)) && gm <= 0.0) break;
    }
    lam = hi;
    xn = x_of(lam);
    g = g_of(xn);
  }

  // Stationarity of the Lagrangian, projected on the box, relative to its curvature scale.
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double a = (t.p0[j] + lam * t.p1[j]) / ((U[j] - xn[j]) * (U[j] - xn[j]));
    const double c = (t.q0[j] + lam * t.q1[j]) / ((xn[j] - L[j]) * (xn[j] - L[j]));
    double d = a - c;
    if (xn[j] <= al[j] && d > 0.0) d = 0.0;
    if (xn[j] >= be[j] && d < 0.0) d = 0.0;
    kkt = std::max(kkt, std::abs(d) / (a + c));
  }
  const double gscale = 1.0 + std::abs(t.b);
  kkt = std::max(kkt, std::max(g, 0.0) / gscale);
  if (lam > 0.0) kkt = std::max(kkt, std::abs(g) / gscale);
  info_ = {lam, g, kkt};

  x_prev2_ = iter_ >= 2 ? x_prev_ : x;
  x_prev_ = x;
  return xn.matrix();
}

}  // namespace mctopo::mma
