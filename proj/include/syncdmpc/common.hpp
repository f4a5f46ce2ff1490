#pragma once

#include <stdexcept>
#include <string>

namespace syncdmpc {

using AgentId = int;

/// Raised for contract violations and unrecoverable runtime failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace syncdmpc
