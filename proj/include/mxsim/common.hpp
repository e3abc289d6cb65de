#pragma once
#include <stdexcept>

namespace mxsim {

// Violated API contract (caller bug): CLI maps this to exit code 2,
// as opposed to malformed user input (std::invalid_argument / runtime_error,
// exit code 1).
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw contract_error(msg);
}

}  // namespace mxsim
