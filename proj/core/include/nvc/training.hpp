#ifndef NVC_TRAINING_HPP
#define NVC_TRAINING_HPP

#include <iosfwd>
#include <random>
#include <unordered_map>

#include "nvc/driver.hpp"

namespace nvc::train {

// Adam with bias correction; frozen parameters are skipped entirely so
// their bytes never move.
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(const weights::NamedParams& params);
  static void zero_grads(const weights::NamedParams& params);

 private:
  struct State {
    Tensor m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<Parameter*, State> state_;
};

// Two-stage schedule: per-frame stage 1 (motion codec separately, then the
// frame codec, then all P-frame parts jointly), then multi-frame
// co-optimization over GoP sizes 3 and 5. Stages 1a/1b run at the
// high-rate pretrain lambda; 1c and stage 2 finetune at the target lambda
// with a decayed learning rate.
struct TrainPlan {
  uint64_t seed = 7;
  double lambda = 32.0;
  double pretrain_lambda = 256.0;
  double lr = 1e-4;
  double finetune_lr_scale = 0.1;
  int i_steps = 400;
  int stage1a_steps = 350;
  int stage1b_steps = 250;
  int stage1c_steps = 200;
  std::vector<std::pair<int, int>> stage2_phases{{3, 120}, {5, 80}};
  int crop = 64;
  std::string data_dir = "synthetic";

  void validate() const;
};

// Line-oriented `key = value` plan file; '#' starts a comment. Keys match
// the TrainPlan fields; stage2_phases is a comma list of gop:steps pairs.
TrainPlan parse_plan(std::istream& in);
TrainPlan parse_plan_file(const std::string& path);

// Synthetic moving-texture clips (global translation, optional second
// parallax layer), or random crops from user-supplied Y4M files.
class ClipSource {
 public:
  ClipSource(const std::string& data_dir, uint64_t seed);

  video::VideoSequence clip(int frames, int h, int w, float max_speed);

  // Deterministic single-texture clip translating at exactly (vx, vy)
  // pixels per frame; used for held-out flow evaluation.
  static video::VideoSequence translation_clip(uint64_t seed, int frames, int h,
                                               int w, float vx, float vy);

 private:
  std::mt19937_64 rng_;
  std::vector<video::VideoSequence> loaded_;
};

struct StepLog {
  std::string stage;
  int step = 0;
  int gop_size = 1;
  double lambda = 0.0;
  double loss = 0.0;
  // (rate_bpp, distortion) per coded frame; entry 0 is the I-frame.
  std::vector<std::pair<double, double>> terms;
};

class Trainer {
 public:
  Trainer(driver::CodecWeights& w, TrainPlan plan);

  void train_i_model();
  void train_p_stage1();
  void train_stage2_joint();
  void run_all();

  const std::vector<StepLog>& logs() const { return logs_; }
  void write_log_csv(const std::string& path) const;

 private:
  Tensor sample_crop();
  video::VideoSequence sample_clip(int frames, float max_speed);
  StepLog run_gop_step(const std::string& stage, int step, int gop_size,
                       double lambda, QuantMode mode, Adam& adam,
                       const weights::NamedParams& trainable);

  driver::CodecWeights& w_;
  TrainPlan plan_;
  ClipSource source_;
  std::mt19937_64 noise_rng_;
  std::vector<StepLog> logs_;
};

}  // namespace nvc::train

#endif
