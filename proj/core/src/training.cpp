#include "nvc/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nvc::train {

void Adam::step(const weights::NamedParams& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (const auto& [name, p] : params) {
    if (p->frozen) continue;
    State& s = state_[p];
    if (s.m.empty()) {
      s.m = Tensor(p->value.shape());
      s.v = Tensor(p->value.shape());
    }
    float* theta = p->value.data();
    const float* g = p->grad.data();
    float* m = s.m.data();
    float* v = s.v.data();
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      m[i] = float(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
      v[i] = float(beta2_ * v[i] + (1.0 - beta2_) * double(g[i]) * g[i]);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= float(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Adam::zero_grads(const weights::NamedParams& params) {
  for (const auto& [name, p] : params) p->zero_grad();
}

void TrainPlan::validate() const {
  contract(i_steps >= 0 && stage1a_steps >= 0 && stage1b_steps >= 0 &&
               stage1c_steps >= 0,
           "train plan: step counts must be >= 0");
  contract(lambda > 0 && pretrain_lambda > 0, "train plan: lambdas must be positive");
  contract(lr > 0 && finetune_lr_scale > 0, "train plan: learning rates must be positive");
  contract(crop >= 64 && crop % 64 == 0,
           "train plan: crop must be a positive multiple of 64");
  for (const auto& [gop, steps] : stage2_phases) {
    contract(gop >= 2, "train plan: stage-2 gop sizes must be >= 2");
    contract(steps >= 0, "train plan: stage-2 steps must be >= 0");
  }
}

TrainPlan parse_plan(std::istream& in) {
  TrainPlan plan;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      // Blank or comment-only lines are fine; anything else is not.
      std::string trimmed = line;
      trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
      if (!trimmed.empty()) {
        throw FormatError("plan file line " + std::to_string(line_no) +
                          ": expected `key = value`, got '" + line + "'");
      }
      continue;
    }
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      const auto last = s.find_last_not_of(" \t\r");
      s.erase(last == std::string::npos ? 0 : last + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "seed") plan.seed = std::stoull(value);
      else if (key == "lambda") plan.lambda = std::stod(value);
      else if (key == "pretrain_lambda") plan.pretrain_lambda = std::stod(value);
      else if (key == "lr") plan.lr = std::stod(value);
      else if (key == "finetune_lr_scale") plan.finetune_lr_scale = std::stod(value);
      else if (key == "i_steps") plan.i_steps = std::stoi(value);
      else if (key == "stage1a_steps") plan.stage1a_steps = std::stoi(value);
      else if (key == "stage1b_steps") plan.stage1b_steps = std::stoi(value);
      else if (key == "stage1c_steps") plan.stage1c_steps = std::stoi(value);
      else if (key == "crop") plan.crop = std::stoi(value);
      else if (key == "data_dir") plan.data_dir = value;
      else if (key == "stage2_phases") {
        plan.stage2_phases.clear();
        std::istringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) {
            throw FormatError("plan file: stage2_phases entries are gop:steps");
          }
          plan.stage2_phases.emplace_back(std::stoi(item.substr(0, colon)),
                                          std::stoi(item.substr(colon + 1)));
        }
      } else {
        throw FormatError("plan file: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("plan file line " + std::to_string(line_no) +
                        ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw FormatError("plan file line " + std::to_string(line_no) +
                        ": value out of range for '" + key + "'");
    }
  }
  plan.validate();
  return plan;
}

TrainPlan parse_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open plan file: " + path);
  return parse_plan(in);
}

namespace {

// Low-pass random texture in [0.08, 0.92] built from two blurred noise
// octaves; channels share the structure with mild per-channel variation.
Tensor make_texture(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_real_distribution<float> sigma_dist(1.2f, 2.8f);

  auto blurred_noise = [&](float sigma) {
    const int taps_n = std::max(3, int(sigma * 4) | 1);
    std::vector<float> taps(static_cast<size_t>(taps_n), 0.0f);
    float sum = 0.0f;
    for (int i = 0; i < taps_n; ++i) {
      const float d = float(i - taps_n / 2);
      taps[size_t(i)] = std::exp(-d * d / (2 * sigma * sigma));
      sum += taps[size_t(i)];
    }
    for (float& v : taps) v /= sum;
    Tensor noise({1, 1, h + taps_n - 1, w + taps_n - 1});
    for (auto& v : noise.vec()) v = unit(rng);
    return kernels::sep_blur_valid(noise, taps);
  };

  const Tensor coarse = blurred_noise(sigma_dist(rng) * 2.0f);
  const Tensor fine = blurred_noise(sigma_dist(rng));
  Tensor base({1, 1, h, w});
  for (int64_t i = 0; i < base.numel(); ++i) {
    base.data()[i] = coarse.data()[i] + 0.45f * fine.data()[i];
  }
  float lo = base.data()[0], hi = base.data()[0];
  for (float v : base.vec()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = std::max(hi - lo, 1e-6f);
  Tensor out({1, 3, h, w});
  for (int c = 0; c < 3; ++c) {
    const float gain = 0.75f + 0.15f * unit(rng);
    const float bias = 0.05f * unit(rng);
    float* p = out.plane(0, c);
    for (int64_t i = 0; i < int64_t(h) * w; ++i) {
      const float v = (base.data()[i] - lo) / span;
      p[i] = std::clamp(0.08f + 0.84f * (gain * v + bias), 0.0f, 1.0f);
    }
  }
  return out;
}

// Samples a window translated by (ox, oy) from a larger canvas, bilinear.
Tensor sample_window(const Tensor& canvas, float oy, float ox, int h, int w) {
  const Shape cs = canvas.shape();
  Tensor out({1, cs.c, h, w});
  for (int c = 0; c < cs.c; ++c) {
    const float* src = canvas.plane(0, c);
    float* dst = out.plane(0, c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float sy = std::clamp(y + oy, 0.0f, float(cs.h - 1));
        const float sx = std::clamp(x + ox, 0.0f, float(cs.w - 1));
        const int y0 = std::min(int(sy), cs.h - 1);
        const int x0 = std::min(int(sx), cs.w - 1);
        const int y1 = std::min(y0 + 1, cs.h - 1);
        const int x1 = std::min(x0 + 1, cs.w - 1);
        const float ty = sy - y0, tx = sx - x0;
        const float a = src[y0 * cs.w + x0], b = src[y0 * cs.w + x1];
        const float cc = src[y1 * cs.w + x0], d = src[y1 * cs.w + x1];
        dst[int64_t(y) * w + x] =
            (a + tx * (b - a)) + ty * ((cc + tx * (d - cc)) - (a + tx * (b - a)));
      }
    }
  }
  return out;
}

video::VideoSequence translate_texture_clip(std::mt19937_64& rng, int frames, int h,
                                            int w, float vx, float vy,
                                            bool parallax) {
  const int margin = int(std::ceil(std::max(std::fabs(vx), std::fabs(vy)) * frames)) + 4;
  const int ch = h + 2 * margin, cw = w + 2 * margin;
  const Tensor canvas = make_texture(rng, ch, cw);

  Tensor fg, mask;
  float fvx = 0, fvy = 0;
  if (parallax) {
    fg = make_texture(rng, ch, cw);
    std::uniform_real_distribution<float> vel(-1.5f, 1.5f);
    fvx = vel(rng);
    fvy = vel(rng);
    // Smooth 0/1 occupancy mask from thresholded low-pass noise.
    std::mt19937_64 mrng(rng());
    Tensor m = make_texture(mrng, ch, cw);
    mask = Tensor({1, 1, ch, cw});
    for (int64_t i = 0; i < mask.numel(); ++i) {
      const float v = m.plane(0, 0)[i];
      mask.data()[i] = 1.0f / (1.0f + std::exp(-(v - 0.5f) * 24.0f));
    }
  }

  video::VideoSequence clip;
  clip.fps = {25, 1};
  for (int t = 0; t < frames; ++t) {
    Tensor frame = sample_window(canvas, margin + t * vy, margin + t * vx, h, w);
    if (parallax) {
      const Tensor fgw = sample_window(fg, margin + t * fvy, margin + t * fvx, h, w);
      const Tensor mw = sample_window(mask, margin + t * fvy, margin + t * fvx, h, w);
      for (int c = 0; c < 3; ++c) {
        float* dst = frame.plane(0, c);
        const float* f = fgw.plane(0, c);
        const float* m = mw.plane(0, 0);
        for (int64_t i = 0; i < int64_t(h) * w; ++i) {
          dst[i] = m[i] * f[i] + (1.0f - m[i]) * dst[i];
        }
      }
    }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

}  // namespace

ClipSource::ClipSource(const std::string& data_dir, uint64_t seed) : rng_(seed) {
  if (data_dir == "synthetic" || data_dir.empty()) return;
  namespace fs = std::filesystem;
  if (!fs::is_directory(data_dir)) {
    throw FormatError("training data directory not found: " + data_dir);
  }
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.path().extension() == ".y4m") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) loaded_.push_back(video::read_y4m_file(p));
  if (loaded_.empty()) {
    throw FormatError("no .y4m clips in training data directory: " + data_dir);
  }
}

video::VideoSequence ClipSource::clip(int frames, int h, int w, float max_speed) {
  if (!loaded_.empty()) {
    std::uniform_int_distribution<size_t> pick(0, loaded_.size() - 1);
    const video::VideoSequence& src = loaded_[pick(rng_)];
    contract(src.width() >= w && src.height() >= h && src.frame_count() >= frames,
             "training clip source too small for the requested crop");
    std::uniform_int_distribution<int> sx(0, src.width() - w);
    std::uniform_int_distribution<int> sy(0, src.height() - h);
    std::uniform_int_distribution<int> st(0, src.frame_count() - frames);
    const int x0 = sx(rng_), y0 = sy(rng_), t0 = st(rng_);
    video::VideoSequence out;
    out.fps = src.fps;
    for (int t = 0; t < frames; ++t) {
      out.frames.push_back(kernels::crop(src.frames[size_t(t0 + t)], y0, x0, h, w));
    }
    return out;
  }
  std::uniform_real_distribution<float> vel(-max_speed, max_speed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  float vx = vel(rng_), vy = vel(rng_);
  if (unit(rng_) < 0.15f) {
    vx = 0.0f;
    vy = 0.0f;
  }
  const bool parallax = unit(rng_) < 0.3f;
  return translate_texture_clip(rng_, frames, h, w, vx, vy, parallax);
}

video::VideoSequence ClipSource::translation_clip(uint64_t seed, int frames, int h,
                                                  int w, float vx, float vy) {
  std::mt19937_64 rng(seed);
  return translate_texture_clip(rng, frames, h, w, vx, vy, false);
}

Trainer::Trainer(driver::CodecWeights& w, TrainPlan plan)
    : w_(w),
      plan_(std::move(plan)),
      source_(plan_.data_dir, plan_.seed),
      noise_rng_(plan_.seed ^ 0x9e3779b97f4a7c15ull) {
  plan_.validate();
}

video::VideoSequence Trainer::sample_clip(int frames, float max_speed) {
  return source_.clip(frames, plan_.crop, plan_.crop, max_speed);
}

namespace {

Value one_minus(Tape& t, Value x) {
  return ad::add_const(t, ad::scale(t, x, -1.0f), 1.0f);
}

double scalar(const Tape& t, Value v) {
  return double(t.value(v).data()[0]);
}

}  // namespace

void Trainer::train_i_model() {
  weights::NamedParams params = w_.i_params();
  Adam adam(plan_.lr);
  const double npix = double(plan_.crop) * plan_.crop;
  for (int step = 0; step < plan_.i_steps; ++step) {
    try {
      const video::VideoSequence clip = sample_clip(1, 0.0f);
      Tape t;
      const Value frame = t.leaf(clip.frames[0]);
      auto res = w_.i_codec().train_forward(t, frame, nullptr, QuantMode::kNoise,
                                            noise_rng_);
      const Value rate = ad::scale(t, res.rate_bits, float(1.0 / npix));
      const Value dist = one_minus(t, metrics::ms_ssim(t, res.recon, frame));
      const Value loss = ad::add(t, rate, ad::scale(t, dist, float(plan_.lambda)));
      Adam::zero_grads(params);
      t.backward(loss);
      adam.step(params);

      StepLog log{"i_model", step, 1, plan_.lambda, scalar(t, loss),
                  {{scalar(t, rate), scalar(t, dist)}}};
      logs_.push_back(std::move(log));
    } catch (const ContractError& e) {
      throw ContractError("train_i_model step " + std::to_string(step) + ": " +
                          e.what());
    }
  }
}

void Trainer::train_p_stage1() {
  const double npix = double(plan_.crop) * plan_.crop;
  auto p_all = [&] {
    weights::NamedParams out = w_.p_params();
    for (auto& nv : w_.flow_params()) out.push_back(nv);
    return out;
  }();

  // Freeze the I-frame model for the whole of stage 1.
  for (auto& [n, p] : w_.i_params()) p->frozen = true;

  // Phase a: flow + motion codec at the high-rate pretrain lambda; the
  // distortion is measured on the motion-compensated reference.
  {
    Adam adam(plan_.lr);
    for (int step = 0; step < plan_.stage1a_steps; ++step) {
      try {
        const video::VideoSequence clip = sample_clip(2, 4.5f);
        Tape t;
        const Value ref = t.leaf(clip.frames[0]);
        const Value cur = t.leaf(clip.frames[1]);
        const Value flow = w_.flow_net().estimate(t, cur, ref);
        auto m = w_.motion().train_forward(t, flow, QuantMode::kNoise, noise_rng_);
        const Value warped = ad::warp_bilinear(t, ref, m.flow_hat);
        const Value rate = ad::scale(t, m.rate_bits, float(1.0 / npix));
        const Value dist = one_minus(t, metrics::ms_ssim(t, warped, cur));
        const Value loss =
            ad::add(t, rate, ad::scale(t, dist, float(plan_.pretrain_lambda)));
        Adam::zero_grads(p_all);
        t.backward(loss);
        adam.step(p_all);
        logs_.push_back(StepLog{"stage1a", step, 2, plan_.pretrain_lambda,
                                scalar(t, loss),
                                {{scalar(t, rate), scalar(t, dist)}}});
      } catch (const ContractError& e) {
        throw ContractError("train_p_stage1 phase a step " + std::to_string(step) +
                            ": " + e.what());
      }
    }
  }

  // Phase b: freeze motion parts, train context mining + frame codec.
  w_.flow_net().set_frozen(true);
  w_.motion().set_frozen(true);
  {
    Adam adam(plan_.lr);
    for (int step = 0; step < plan_.stage1b_steps; ++step) {
      try {
        const video::VideoSequence clip = sample_clip(2, 2.0f);
        // Reference state from the frozen I-frame model.
        auto iref = w_.i_codec().encode(clip.frames[0], nullptr);
        const Tensor flow = w_.flow_net().estimate(clip.frames[1], iref.recon);
        auto menc = w_.motion().encode(flow);

        Tape t;
        nn::GradCtx ctx{&t};
        const Value cur = t.leaf(clip.frames[1]);
        const auto feats = w_.miner().extract_features(
            ctx, t.leaf(iref.recon), t.leaf(iref.recon_feature));
        const auto cp = w_.miner().mine(ctx, feats, t.leaf(menc.flow_hat));
        auto f = w_.p_codec().train_forward(t, cur, &cp, QuantMode::kNoise,
                                            noise_rng_);
        const Value rate = ad::scale(t, f.rate_bits, float(1.0 / npix));
        const Value dist = one_minus(t, metrics::ms_ssim(t, f.recon, cur));
        const Value loss =
            ad::add(t, rate, ad::scale(t, dist, float(plan_.pretrain_lambda)));
        Adam::zero_grads(p_all);
        t.backward(loss);
        adam.step(p_all);
        logs_.push_back(StepLog{"stage1b", step, 2, plan_.pretrain_lambda,
                                scalar(t, loss),
                                {{scalar(t, rate), scalar(t, dist)}}});
      } catch (const ContractError& e) {
        throw ContractError("train_p_stage1 phase b step " + std::to_string(step) +
                            ": " + e.what());
      }
    }
  }

  // Phase c: all P-frame parts jointly, finetuning to the target lambda.
  w_.flow_net().set_frozen(false);
  w_.motion().set_frozen(false);
  {
    Adam adam(plan_.lr * plan_.finetune_lr_scale);
    for (int step = 0; step < plan_.stage1c_steps; ++step) {
      try {
        const video::VideoSequence clip = sample_clip(2, 2.0f);
        auto iref = w_.i_codec().encode(clip.frames[0], nullptr);

        Tape t;
        nn::GradCtx ctx{&t};
        const Value ref_recon = t.leaf(iref.recon);
        const Value cur = t.leaf(clip.frames[1]);
        const Value flow = w_.flow_net().estimate(t, cur, ref_recon);
        auto m = w_.motion().train_forward(t, flow, QuantMode::kNoise, noise_rng_);
        const auto feats = w_.miner().extract_features(
            ctx, ref_recon, t.leaf(iref.recon_feature));
        const auto cp = w_.miner().mine(ctx, feats, m.flow_hat);
        auto f = w_.p_codec().train_forward(t, cur, &cp, QuantMode::kNoise,
                                            noise_rng_);
        const Value rate = ad::scale(t, ad::add(t, m.rate_bits, f.rate_bits),
                                     float(1.0 / npix));
        const Value dist = one_minus(t, metrics::ms_ssim(t, f.recon, cur));
        const Value loss = ad::add(t, rate, ad::scale(t, dist, float(plan_.lambda)));
        Adam::zero_grads(p_all);
        t.backward(loss);
        adam.step(p_all);
        logs_.push_back(StepLog{"stage1c", step, 2, plan_.lambda, scalar(t, loss),
                                {{scalar(t, rate), scalar(t, dist)}}});
      } catch (const ContractError& e) {
        throw ContractError("train_p_stage1 phase c step " + std::to_string(step) +
                            ": " + e.what());
      }
    }
  }
}

StepLog Trainer::run_gop_step(const std::string& stage, int step, int gop_size,
                              double lambda, QuantMode mode, Adam& adam,
                              const weights::NamedParams& trainable) {
  const double npix = double(plan_.crop) * plan_.crop;
  const video::VideoSequence clip = sample_clip(gop_size, 1.5f);

  Tape t;
  nn::GradCtx ctx{&t};
  StepLog log{stage, step, gop_size, lambda, 0.0, {}};

  const Value f0 = t.leaf(clip.frames[0]);
  auto ires = w_.i_codec().train_forward(t, f0, nullptr, mode, noise_rng_);
  Value r_i = ad::scale(t, ires.rate_bits, float(1.0 / npix));
  Value d_i = one_minus(t, metrics::ms_ssim(t, ires.recon, f0));
  Value loss = ad::add(t, r_i, ad::scale(t, d_i, float(lambda)));
  log.terms.emplace_back(scalar(t, r_i), scalar(t, d_i));

  Value prev_recon = ires.recon;
  Value prev_feature = ires.recon_feature;
  for (int k = 1; k < gop_size; ++k) {
    const Value cur = t.leaf(clip.frames[size_t(k)]);
    const Value flow = w_.flow_net().estimate(t, cur, prev_recon);
    auto m = w_.motion().train_forward(t, flow, mode, noise_rng_);
    const auto feats = w_.miner().extract_features(ctx, prev_recon, prev_feature);
    const auto cp = w_.miner().mine(ctx, feats, m.flow_hat);
    auto f = w_.p_codec().train_forward(t, cur, &cp, mode, noise_rng_);
    const Value r_t =
        ad::scale(t, ad::add(t, m.rate_bits, f.rate_bits), float(1.0 / npix));
    const Value d_t = one_minus(t, metrics::ms_ssim(t, f.recon, cur));
    loss = ad::add(t, loss, ad::add(t, r_t, ad::scale(t, d_t, float(lambda))));
    log.terms.emplace_back(scalar(t, r_t), scalar(t, d_t));
    prev_recon = f.recon;
    prev_feature = f.recon_feature;
  }

  Adam::zero_grads(trainable);
  t.backward(loss);
  adam.step(trainable);
  log.loss = scalar(t, loss);
  return log;
}

void Trainer::train_stage2_joint() {
  // Joint optimization: the I-frame model unfreezes so the gradient of
  // P-frame distortion reaches it through the reference chain.
  for (auto& [n, p] : w_.i_params()) p->frozen = false;
  weights::NamedParams all = w_.i_params();
  for (auto& nv : w_.p_params()) all.push_back(nv);
  for (auto& nv : w_.flow_params()) all.push_back(nv);

  Adam adam(plan_.lr * plan_.finetune_lr_scale);
  for (const auto& [gop, steps] : plan_.stage2_phases) {
    for (int step = 0; step < steps; ++step) {
      try {
        logs_.push_back(run_gop_step("stage2_gop" + std::to_string(gop), step, gop,
                                     plan_.lambda, QuantMode::kNoiseRateSteRecon,
                                     adam, all));
      } catch (const ContractError& e) {
        throw ContractError("train_stage2 gop " + std::to_string(gop) + " step " +
                            std::to_string(step) + ": " + e.what());
      }
    }
  }
}

void Trainer::run_all() {
  train_i_model();
  train_p_stage1();
  train_stage2_joint();
}

void Trainer::write_log_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot create loss log: " + path);
  out << "stage,step,gop_size,lambda,loss,terms...\n";
  char buf[64];
  for (const StepLog& log : logs_) {
    out << log.stage << "," << log.step << "," << log.gop_size << ",";
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", log.lambda, log.loss);
    out << buf;
    for (const auto& [r, d] : log.terms) {
      std::snprintf(buf, sizeof buf, ",%.9g,%.9g", r, d);
      out << buf;
    }
    out << "\n";
  }
}

Tensor Trainer::sample_crop() {
  return sample_clip(1, 0.0f).frames[0];
}

}  // namespace nvc::train
