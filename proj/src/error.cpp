#include "sayo/error.hpp"

namespace sayo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parameter: return "parameter error";
    case ErrorCode::precondition: return "precondition error";
    case ErrorCode::shape: return "shape error";
    case ErrorCode::decomposition: return "decomposition error";
    case ErrorCode::unsupported_marginal: return "unsupported-marginal error";
    case ErrorCode::insufficient_data: return "insufficient-data error";
    case ErrorCode::numeric: return "numeric error";
    case ErrorCode::not_found: return "not-found error";
    case ErrorCode::empty: return "empty error";
    case ErrorCode::degenerate_model: return "degenerate-model error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::ordering: return "ordering error";
    case ErrorCode::sequence: return "sequence error";
    case ErrorCode::io: return "io error";
  }
  return "error";
}

std::string code_name(ErrorCode code) {
  std::string name(to_string(code));
  name.resize(name.size() - std::string_view(" error").size());
  for (char& c : name)
    if (c == '-') c = '_';
  return name;
}

}  // namespace sayo
