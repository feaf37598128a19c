#pragma once

#include <cstdint>

namespace scgnn::seed_offset {

// Every random stream of a run derives from one seed by these offsets.
inline constexpr std::uint64_t kGbc = 0;
inline constexpr std::uint64_t kBridge = 1; // relative to the gbc seed
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kDropout = 3;

} // namespace scgnn::seed_offset
