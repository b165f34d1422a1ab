#include "peohoi/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace peohoi {

namespace {

class Optimizer {
 public:
  Optimizer(ParamSet<float>& params, const OptimizerConfig& cfg, double clip_norm)
      : params_(params), cfg_(cfg), clip_(clip_norm) {
    for (auto& p : params_) {
      m_.push_back(Tensor<float>::zeros(p.value.shape));
      v_.push_back(Tensor<float>::zeros(p.value.shape));
    }
  }

  // returns the pre-clip global gradient norm
  double step() {
    double norm2 = 0;
    for (auto& p : params_) {
      if (!p.trainable) continue;
      for (float g : p.grad.data) norm2 += double(g) * g;
    }
    double norm = std::sqrt(norm2);
    double scale = norm > clip_ ? clip_ / norm : 1.0;
    ++t_;
    if (cfg_.kind == "adam") {
      double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
      double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
      for (size_t i = 0; i < params_.size(); ++i) {
        Parameter<float>& p = params_[i];
        if (!p.trainable) continue;
        for (size_t j = 0; j < p.value.data.size(); ++j) {
          double g = double(p.grad.data[j]) * scale;
          double m = cfg_.beta1 * m_[i].data[j] + (1 - cfg_.beta1) * g;
          double v = cfg_.beta2 * v_[i].data[j] + (1 - cfg_.beta2) * g * g;
          m_[i].data[j] = float(m);
          v_[i].data[j] = float(v);
          p.value.data[j] -= float(cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps));
        }
      }
    } else {  // sgd with momentum
      for (size_t i = 0; i < params_.size(); ++i) {
        Parameter<float>& p = params_[i];
        if (!p.trainable) continue;
        for (size_t j = 0; j < p.value.data.size(); ++j) {
          double g = double(p.grad.data[j]) * scale;
          double m = cfg_.momentum * m_[i].data[j] + g;
          m_[i].data[j] = float(m);
          p.value.data[j] -= float(cfg_.lr * m);
        }
      }
    }
    params_.zero_grads();
    return norm;
  }

 private:
  ParamSet<float>& params_;
  OptimizerConfig cfg_;
  double clip_;
  std::vector<Tensor<float>> m_, v_;
  int64_t t_ = 0;
};

bool params_finite(const ParamSet<float>& ps) {
  for (const auto& p : ps)
    if (!p.value.all_finite()) return false;
  return true;
}

}  // namespace

Checkpoint snapshot_model(const Model<float>& model, const FrequencyTable& freqs,
                          const TrainConfig& cfg) {
  Checkpoint ckpt;
  ckpt.model_cfg = model.cfg;
  ckpt.labels = model.labels;
  ckpt.train_freqs = freqs;
  ckpt.train_cfg = cfg;
  for (const auto& p : model.params) ckpt.params.push_back({p.name, p.value});
  return ckpt;
}

std::vector<PairScores> infer_dataset(Model<float>& model, const Dataset& data,
                                      bool want_proto_features, int threads) {
  const int num_videos = int(data.videos.size());
  std::vector<std::vector<PairScores>> per_video(num_videos);
  if (threads <= 1 || num_videos <= 1) {
    for (int v = 0; v < num_videos; ++v)
      per_video[v] = infer_video(model, data, v, want_proto_features);
  } else {
    // inference is pure; videos are chunked and results collected in fixed
    // order so the output is independent of the thread count
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        int v = next.fetch_add(1);
        if (v >= num_videos) return;
        per_video[v] = infer_video(model, data, v, want_proto_features);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < std::min(threads, num_videos); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<PairScores> out;
  for (auto& v : per_video)
    for (auto& ps : v) out.push_back(std::move(ps));
  return out;
}

TrainResult train(const Dataset& train_data, const Dataset& val_data, TrainConfig cfg,
                  const EmbeddingTable& words) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.model.dims = train_data.dims;
  cfg.model.resolve();
  cfg.validate();
  if (!(train_data.label_space == val_data.label_space))
    throw ConfigError("train: training and validation label spaces differ");
  if (!(train_data.dims == val_data.dims)) throw ConfigError("train: dataset dims differ");

  Model<float> model(cfg.model, train_data.label_space, words, cfg.seed);

  FrequencyTable freqs = compute_frequencies(train_data);
  std::vector<double> class_w = cb_weights(freqs.label_counts, cfg.loss.beta_cb);
  std::vector<double> omega(freqs.label_counts.size(), 1.0);
  if (cfg.model.mode == AblationMode::pen_pwce)
    omega = propensity(freqs, cfg.loss.propensity_c).omega;

  std::vector<WindowPlan> plans;
  for (int v = 0; v < int(train_data.videos.size()); ++v)
    for (auto& p : build_windows(train_data.videos[v], cfg.model.window, v))
      plans.push_back(std::move(p));
  if (plans.empty()) throw ConfigError("train: training set has no pair instances");

  Optimizer opt(model.params, cfg.opt, cfg.clip_norm);
  model.params.zero_grads();

  TrainResult result;
  TrainLog& log = result.log;
  Checkpoint rolling = snapshot_model(model, freqs, cfg);  // last known-good state
  int step = 0;

  auto validate_epoch = [&](int epoch) {
    if (val_data.videos.empty()) return;
    EvalReport rep = map_report(infer_dataset(model, val_data, false), val_data, freqs,
                                cfg.loss.rare_threshold);
    log.epochs.push_back({epoch, rep.map_full, rep.map_non_rare, rep.map_rare});
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(seed_for(cfg.seed, strf("epoch/", epoch)));
    std::vector<int> order(plans.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    for (int i = int(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      std::vector<WindowPlan> batch;
      for (size_t i = start; i < std::min(order.size(), start + size_t(cfg.batch_size)); ++i)
        batch.push_back(plans[order[i]]);

      Graph<float> g;
      StepLoss<float> loss = model.step_loss(g, train_data, batch, class_w, omega, cfg.loss);
      double total = double(g.value(loss.total).data[0]);
      double focal = double(g.value(loss.focal).data[0]);
      double pwce = double(g.value(loss.pwce).data[0]);
      if (!std::isfinite(total)) {
        result.aborted = true;
        result.abort_reason = strf("non-finite loss at step ", step, " (focal=", focal,
                                   ", pwce=", pwce, ")");
        result.checkpoint = std::move(rolling);
        return result;
      }
      g.backward(loss.total);
      double gnorm = opt.step();
      if (!std::isfinite(gnorm) || !params_finite(model.params)) {
        result.aborted = true;
        result.abort_reason = strf("non-finite gradients or parameters at step ", step);
        result.checkpoint = std::move(rolling);
        return result;
      }
      log.steps.push_back({step, focal, pwce, total, gnorm});
      ++step;
      if (step % 25 == 0) rolling = snapshot_model(model, freqs, cfg);
    }
    if (cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs))
      validate_epoch(epoch);
    else if (cfg.eval_every == 0 && epoch + 1 == cfg.epochs)
      validate_epoch(epoch);
  }

  result.checkpoint = snapshot_model(model, freqs, cfg);
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace peohoi
