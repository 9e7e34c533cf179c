// nvc: neural video codec CLI.
//
// Subcommands: encode, decode, eval, info, train.
// Exit codes: 0 ok, 2 format error, 3 weights mismatch, 4 contract violation.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "nvc/driver.hpp"
#include "nvc/training.hpp"
#include "nvc/weights.hpp"

namespace {

constexpr uint64_t kDefaultSeed = 0x5eed;

nvc::driver::CodecWeights load_weights(const std::string& dir) {
  nvc::driver::CodecWeights w(kDefaultSeed);
  if (!dir.empty()) w.load(dir);
  return w;
}

std::vector<uint8_t> read_stream(const std::string& path) {
  return nvc::weights::read_file(path);
}

int run_encode(const std::string& input, const std::string& output,
               double target_mbps, int gop, const std::string& weights_dir,
               const std::string& sr_mode, int lambda_id) {
  nvc::driver::CodecWeights w = load_weights(weights_dir);
  nvc::driver::CodecConfig cfg;
  cfg.gop_size = gop;
  cfg.target_mbps = target_mbps;
  cfg.lambda_id = uint8_t(lambda_id);
  if (sr_mode == "none") {
    cfg.sr_override = nvc::sr::SrMode{1, 1};
  } else if (sr_mode == "temporal") {
    cfg.sr_override = nvc::sr::SrMode{1, 4};
  } else if (sr_mode == "full") {
    cfg.sr_override = nvc::sr::SrMode{4, 4};
  } else if (!sr_mode.empty()) {
    throw nvc::ContractError("unknown --sr-mode '" + sr_mode +
                             "' (expected none|temporal|full)");
  }

  const auto video = nvc::video::read_y4m_file(input);
  const auto stream = nvc::driver::encode_video(video, w, cfg);
  nvc::weights::write_file(output, std::span(stream.data(), stream.size()));
  std::cout << "encoded " << video.frame_count() << " frames ("
            << video.width() << "x" << video.height() << ") to " << stream.size()
            << " bytes\n";
  return 0;
}

int run_decode(const std::string& input, const std::string& output,
               const std::string& weights_dir) {
  nvc::driver::CodecWeights w = load_weights(weights_dir);
  const auto stream = read_stream(input);
  const auto video =
      nvc::driver::decode_video(std::span(stream.data(), stream.size()), w);
  nvc::video::write_y4m_file(video, output);
  std::cout << "decoded " << video.frame_count() << " frames (" << video.width()
            << "x" << video.height() << ")\n";
  return 0;
}

int run_eval(const std::string& original, const std::string& decoded,
             const std::string& stream_path, const std::string& report_path) {
  const auto orig = nvc::video::read_y4m_file(original);
  const auto dec = nvc::video::read_y4m_file(decoded);
  const auto stream = read_stream(stream_path);
  const auto report =
      nvc::driver::evaluate(orig, dec, std::span(stream.data(), stream.size()));
  std::cout << report.table();
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw nvc::FormatError("cannot create report file: " + report_path);
    out << report.key_values();
  }
  return 0;
}

int run_info(const std::string& stream_path) {
  const auto stream = read_stream(stream_path);
  nvc::bitstream::ByteReader r(std::span(stream.data(), stream.size()));
  const auto h = nvc::bitstream::read_header(r);
  std::cout << "nvc1 stream\n"
            << "  coded extents      " << h.width << "x" << h.height << "\n"
            << "  original extents   " << h.original_width << "x"
            << h.original_height << "\n"
            << "  coded frames       " << h.frame_count << "\n"
            << "  original frames    " << h.original_frame_count << "\n"
            << "  fps                " << h.fps_num << "/" << h.fps_den << "\n"
            << "  gop size           " << h.gop_size << "\n"
            << "  spatial factor     " << int(h.spatial_factor) << "\n"
            << "  temporal factor    " << int(h.temporal_factor) << "\n"
            << "  lambda id          " << int(h.lambda_id) << "\n"
            << "  weights hash       " << std::hex << h.weights_hash << std::dec
            << "\n";
  return 0;
}

int run_train(const std::string& plan_path, const std::string& out_dir) {
  const auto plan = nvc::train::parse_plan_file(plan_path);
  nvc::driver::CodecWeights w(plan.seed);
  nvc::train::Trainer trainer(w, plan);
  trainer.run_all();
  w.save(out_dir);
  trainer.write_log_csv(out_dir + "/loss_log.csv");
  std::cout << "trained " << trainer.logs().size() << " steps; weights in "
            << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nvc: conditional neural video codec with spatial-temporal "
               "super-resolution"};
  app.require_subcommand(1);

  std::string input, output, weights_dir, sr_mode, original, decoded, stream_path,
      report_path, plan_path, out_dir;
  double target_mbps = 0.5;
  int gop = 32;
  int lambda_id = 0;

  auto* enc = app.add_subcommand("encode", "Encode a Y4M file to an NVC1 stream");
  enc->add_option("--input", input, "input .y4m")->required();
  enc->add_option("--output", output, "output .nvc stream")->required();
  enc->add_option("--target-mbps", target_mbps,
                  "target bitrate driving super-resolution mode selection")
      ->required();
  enc->add_option("--gop", gop, "GoP size (default 32)");
  enc->add_option("--weights", weights_dir, "weights directory");
  enc->add_option("--sr-mode", sr_mode, "override: none|temporal|full");
  enc->add_option("--lambda-id", lambda_id, "weights-set id recorded in the header");

  auto* dec = app.add_subcommand("decode", "Decode an NVC1 stream to Y4M");
  dec->add_option("--input", input, "input .nvc stream")->required();
  dec->add_option("--output", output, "output .y4m")->required();
  dec->add_option("--weights", weights_dir, "weights directory");

  auto* ev = app.add_subcommand("eval", "Rate/distortion report for a decode");
  ev->add_option("--original", original, "original .y4m")->required();
  ev->add_option("--decoded", decoded, "decoded .y4m")->required();
  ev->add_option("--stream", stream_path, "the .nvc stream")->required();
  ev->add_option("--report", report_path, "write key = value report here");

  auto* info = app.add_subcommand("info", "Print an NVC1 stream header");
  info->add_option("--stream", stream_path, "the .nvc stream")->required();

  auto* tr = app.add_subcommand("train", "Run the two-stage training plan");
  tr->add_option("--plan", plan_path, "plan file (key = value lines)")->required();
  tr->add_option("--out", out_dir, "output directory for weights + loss log")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (enc->parsed()) {
      return run_encode(input, output, target_mbps, gop, weights_dir, sr_mode,
                        lambda_id);
    }
    if (dec->parsed()) return run_decode(input, output, weights_dir);
    if (ev->parsed()) return run_eval(original, decoded, stream_path, report_path);
    if (info->parsed()) return run_info(stream_path);
    if (tr->parsed()) return run_train(plan_path, out_dir);
  } catch (const nvc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
