#include "mctopo/filter.hpp"

#include <cmath>

#include "mctopo/error.hpp"

namespace mctopo::topopt {

ConeFilter::ConeFilter(const fea::MacroMesh& mesh, double r_min) : r_min_(r_min) {
  if (!(r_min >= 0.0) || !std::isfinite(r_min)) throw Error(ErrorKind::InvalidInput, "filter radius must be >= 0");
  const auto act = mesh.active_elements();
  std::vector<int> index(static_cast<std::size_t>(mesh.n_elements()), -1);
  for (std::size_t k = 0; k < act.size(); ++k) index[static_cast<std::size_t>(act[k])] = static_cast<int>(k);

  const int reach = static_cast<int>(std::ceil(r_min));
  H_.rows = H_.cols = static_cast<int>(act.size());
  for (int e : act) {
    const int i = e % mesh.nx, j = e / mesh.nx;
    const std::size_t start = H_.col.size();
    double sum = 0.0;
    for (int dj = -reach; dj <= reach; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || jj < 0 || ii >= mesh.nx || jj >= mesh.ny) continue;
        const int k = index[static_cast<std::size_t>(mesh.element(ii, jj))];
        if (k < 0) continue;
        const double w = r_min - std::sqrt(static_cast<double>(di * di + dj * dj));
        if (w <= 0.0) continue;
        H_.col.push_back(k);
        H_.val.push_back(w);
        sum += w;
      }
    if (sum <= 0.0) {  // r_min == 0: plain identity
      H_.col.push_back(index[static_cast<std::size_t>(e)]);
      H_.val.push_back(1.0);
      sum = 1.0;
    }
    for (std::size_t p = start; p < H_.val.size(); ++p) H_.val[p] /= sum;
    H_.row_ptr.push_back(static_cast<int>(H_.col.size()));
  }
  Ht_ = H_.transpose();
}

Eigen::VectorXd ConeFilter::apply(const Eigen::VectorXd& x, Execution exec) const {
  if (x.size() != H_.cols) throw Error(ErrorKind::InvalidInput, "filter input has the wrong length");
  Eigen::VectorXd y(H_.rows);
  if (exec == Execution::Parallel)
    kernels::csr_multiply(H_, {x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())});
  else
    kernels::serial::csr_multiply(H_, {x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())});
  return y;
}

Eigen::VectorXd ConeFilter::back(const Eigen::VectorXd& g, Execution exec) const {
  if (g.size() != Ht_.cols) throw Error(ErrorKind::InvalidInput, "filter gradient has the wrong length");
  Eigen::VectorXd y(Ht_.rows);
  if (exec == Execution::Parallel)
    kernels::csr_multiply(Ht_, {g.data(), static_cast<std::size_t>(g.size())}, {y.data(), static_cast<std::size_t>(y.size())});
  else
    kernels::serial::csr_multiply(Ht_, {g.data(), static_cast<std::size_t>(g.size())}, {y.data(), static_cast<std::size_t>(y.size())});
  return y;
}

}  // namespace mctopo::topopt
