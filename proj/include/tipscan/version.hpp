#pragma once

namespace tipscan {
inline constexpr const char* kToolVersion = "0.1.0";
}
