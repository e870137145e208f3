#pragma once

namespace tckls::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

int run(int argc, char** argv);

}  // namespace tckls::cli
