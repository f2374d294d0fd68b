// tpc: decode, analyze and evaluate logit-trajectory connection.
//
// Exit codes: 0 success, 2 invalid config or flags, 3 corrupt or invalid
// input, 4 runtime decode error.

#include <iostream>

#include "cli_common.hpp"

namespace {

int exit_code(tpc::Errc code) {
  switch (code) {
    case tpc::Errc::InvalidConfig:
      return 2;
    case tpc::Errc::CorruptFile:
    case tpc::Errc::UnsupportedFormat:
    case tpc::Errc::InvalidFrame:
    case tpc::Errc::InvalidInput:
      return 3;
    case tpc::Errc::DimensionMismatch:
    case tpc::Errc::InvalidToken:
    case tpc::Errc::DecodeError:
      return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-timestep logit connection for decoding, with analysis and evaluation tools", "tpc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tpc 1.0.0");
  tpc::cli::register_decode(app);
  tpc::cli::register_sweep(app);
  tpc::cli::register_bench(app);
  tpc::cli::register_config(app);
  tpc::cli::register_toylm(app);
  tpc::cli::register_divergence(app);
  tpc::cli::register_sliding_window(app);
  tpc::cli::register_pca(app);
  tpc::cli::register_pope_eval(app);
  tpc::cli::register_chair_eval(app);
  tpc::cli::register_hi_eval(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const tpc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [CorruptFile]: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
