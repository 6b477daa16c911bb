#include "mctopo/error.hpp"

namespace mctopo {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InfeasibleTarget: return "infeasible target";
    case ErrorKind::DegenerateCell: return "degenerate cell";
    case ErrorKind::NonOrthotropicCell: return "non-orthotropic cell";
    case ErrorKind::IllConditionedData: return "ill-conditioned data";
    case ErrorKind::FitFailure: return "fit failure";
    case ErrorKind::InvalidStiffness: return "invalid stiffness";
    case ErrorKind::Mechanism: return "mechanism";
    case ErrorKind::RejectedIterate: return "rejected iterate";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace mctopo
