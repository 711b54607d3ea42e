#pragma once

#include <string>
#include <vector>

namespace csip::cli {

/// Exit statuses: 0 success, 1 domain error, 2 aborted invariant,
/// 64 usage error.
inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kAbortedInvariant = 2;
inline constexpr int kUsageError = 64;

int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace csip::cli
