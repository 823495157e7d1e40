#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "waml/eval.hpp"
#include "waml/model.hpp"

namespace waml {

enum class LossKind : uint8_t { Contrastive = 0, Triplet = 1 };

struct TrainConfig {
  int64_t batch_size = 128;
  double temperature = 0.1;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t max_epochs = 200;
  int64_t patience = 10;
  uint64_t seed = 42;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  LossKind loss = LossKind::Contrastive;
  double triplet_margin = 0.3;
  bool symmetric = false;  // adds the product-anchored contrastive term
  int64_t val_k = 100;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("train.temperature must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (val_k < 1) throw ConfigError("train.val_k must be >= 1");
    double total = 0.0;
    for (double r : split_ratios) {
      if (r < 0.0) throw ConfigError("train.split ratios must be non-negative");
      total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("train.split ratios must sum to 1");
  }
};

// Disjoint train/validation/test partition of seller-product edges.
struct EdgeSplit {
  std::vector<IndexPair> train, validation, test;
};

// Uniform seeded partition. Split sizes come from floor counts with the
// remainder handed out by largest fractional share, so 10 edges at
// (0.8, 0.1, 0.1) give exactly 8/1/1.
inline EdgeSplit split_edges(const std::vector<IndexPair>& edges, std::array<double, 3> ratios,
                             uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0.0)) throw ConfigError("split ratios must sum to a positive value");
  for (double& r : ratios) r /= total;

  const int64_t n = static_cast<int64_t>(edges.size());
  std::array<int64_t, 3> sizes;
  std::array<double, 3> fractional;
  int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<int64_t>(std::floor(exact));
    fractional[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (fractional[i] > fractional[best]) best = i;
    }
    sizes[best]++;
    fractional[best] = -1.0;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (ratios[i] > 0.0 && sizes[i] == 0) {
      throw DataError("too few edges to populate all requested splits");
    }
  }

  std::vector<IndexPair> shuffled = edges;
  Rng rng(splitmix64(seed ^ 0x73706C6974ULL));
  rng.shuffle(shuffled);

  EdgeSplit split;
  split.train.assign(shuffled.begin(), shuffled.begin() + sizes[0]);
  split.validation.assign(shuffled.begin() + sizes[0], shuffled.begin() + sizes[0] + sizes[1]);
  split.test.assign(shuffled.begin() + sizes[0] + sizes[1], shuffled.end());
  return split;
}

// One epoch of minibatches: a shuffled pass over the train edges in
// consecutive chunks of batch_size (final chunk may be smaller).
class MinibatchSampler {
 public:
  MinibatchSampler(std::vector<IndexPair> train_edges, int64_t batch_size, uint64_t seed)
      : edges_(std::move(train_edges)), batch_size_(batch_size), rng_(splitmix64(seed ^ 0x6261746368ULL)) {
    if (batch_size_ < 1) throw ConfigError("batch size must be >= 1");
    if (batch_size_ > static_cast<int64_t>(edges_.size())) {
      throw DataError("batch size exceeds the number of training edges");
    }
  }

  std::vector<std::vector<IndexPair>> epoch() {
    rng_.shuffle(edges_);
    std::vector<std::vector<IndexPair>> batches;
    for (size_t start = 0; start < edges_.size(); start += static_cast<size_t>(batch_size_)) {
      const size_t end = std::min(edges_.size(), start + static_cast<size_t>(batch_size_));
      batches.emplace_back(edges_.begin() + static_cast<int64_t>(start),
                           edges_.begin() + static_cast<int64_t>(end));
    }
    return batches;
  }

  uint64_t draw_seed() { return rng_.next(); }

 private:
  std::vector<IndexPair> edges_;
  int64_t batch_size_;
  Rng rng_;
};

// In-batch contrastive loss. For anchor seller i the denominator sums
// exp(dot/tau) over the other 2N-1 batch embeddings (its positive product,
// the other products, the other sellers); the anchor itself is excluded.
// Computed through the max-shift log-sum-exp identity.
template <typename T>
Tensor<T> contrastive_loss(Tape<T>& tape, const Tensor<T>& sellers, const Tensor<T>& products,
                           double tau, bool symmetric = false) {
  if (sellers.rows() == 0) throw DataError("contrastive loss requires a non-empty batch");
  if (sellers.rows() != products.rows() || sellers.cols() != products.cols()) {
    throw DataError("contrastive loss: seller/product batch shapes must match");
  }
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  const int64_t n = sellers.rows();

  auto anchored = [&](const Tensor<T>& anchors, const Tensor<T>& others) {
    Tensor<T> all = concat_rows(tape, others, anchors);  // positives first
    Tensor<T> logits = scale(tape, matmul_nt(tape, anchors, all), 1.0 / tau);
    std::vector<int64_t> positive(static_cast<size_t>(n)), excluded(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      positive[static_cast<size_t>(i)] = i;
      excluded[static_cast<size_t>(i)] = n + i;  // the anchor's own column
    }
    Tensor<T> pos = take_per_row(tape, logits, positive);
    Tensor<T> lse = row_logsumexp_excluding(tape, logits, excluded);
    return mean_all(tape, sub(tape, lse, pos));
  };

  Tensor<T> loss = anchored(sellers, products);
  if (symmetric) {
    loss = scale(tape, add(tape, loss, anchored(products, sellers)), 0.5);
  }
  return loss;
}

// Margin hinge with the next batch product as the negative; the documented
// stand-in for the pre-contrastive training objective.
template <typename T>
Tensor<T> triplet_loss(Tape<T>& tape, const Tensor<T>& sellers, const Tensor<T>& products,
                       double margin) {
  if (sellers.rows() == 0) throw DataError("triplet loss requires a non-empty batch");
  const int64_t n = sellers.rows();
  if (n == 1) {
    return Tensor<T>::zeros(1, 1);  // no in-batch negative exists
  }
  std::vector<int64_t> shifted(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) shifted[static_cast<size_t>(i)] = (i + 1) % n;
  Tensor<T> pos = row_dot(tape, sellers, products);
  Tensor<T> neg = row_dot(tape, sellers, gather_rows(tape, products, shifted));
  Tensor<T> hinge = relu(tape, affine(tape, sub(tape, neg, pos), 1.0, margin));
  return mean_all(tape, hinge);
}

// AdamW with decoupled weight decay applied before the adaptive update.
template <typename T>
struct OptimizerState {
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<Slot> slots;
  int64_t step = 0;

  static OptimizerState for_params(const std::vector<Tensor<T>>& params) {
    OptimizerState state;
    state.slots.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.slots[i].m.assign(static_cast<size_t>(params[i].size()), T(0));
      state.slots[i].v.assign(static_cast<size_t>(params[i].size()), T(0));
    }
    return state;
  }
};

template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, OptimizerState<T>& state, const TrainConfig& cfg) {
  if (state.slots.size() != params.size()) throw DataError("optimizer state does not match params");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = params[pi];
    if (static_cast<int64_t>(state.slots[pi].m.size()) != p.size()) {
      throw DataError("optimizer slot shape mismatch");
    }
    T* w = p.data();
    const T* g = p.grad();
    auto& m = state.slots[pi].m;
    auto& v = state.slots[pi].v;
    for (int64_t i = 0; i < p.size(); ++i) {
      w[i] = static_cast<T>(w[i] * (1.0 - cfg.learning_rate * cfg.weight_decay));
      m[static_cast<size_t>(i)] = static_cast<T>(cfg.adam_beta1 * m[static_cast<size_t>(i)] +
                                                 (1.0 - cfg.adam_beta1) * g[i]);
      v[static_cast<size_t>(i)] = static_cast<T>(cfg.adam_beta2 * v[static_cast<size_t>(i)] +
                                                 (1.0 - cfg.adam_beta2) * g[i] * g[i]);
      const double mhat = m[static_cast<size_t>(i)] / bc1;
      const double vhat = v[static_cast<size_t>(i)] / bc2;
      w[i] = static_cast<T>(w[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

struct EpochLog {
  int64_t epoch;
  double train_loss;
  double val_recall;
  double wall_seconds;
};

template <typename T>
struct TrainResult {
  ModelParams<T> best_params;
  double best_val_recall = 0.0;
  int64_t best_epoch = 0;
  std::vector<EpochLog> log;

  std::string log_text() const {
    std::ostringstream os;
    os << "# epoch\ttrain_loss\tval_recall\twall_seconds\n";
    for (const EpochLog& l : log) {
      os << l.epoch << '\t' << l.train_loss << '\t' << l.val_recall << '\t' << l.wall_seconds
         << '\n';
    }
    return os.str();
  }
};

// Full training protocol: per batch a full-graph forward, loss on the
// gathered batch rows, backward, AdamW step; per epoch a validation
// Recall@val_k; early stop on patience; best-validation params returned.
template <typename T>
TrainResult<T> train(const HeteroGraph& g, const Tensor<T>& h0, ModelParams<T>& params,
                     const WamlConfig& waml_cfg, const HeadConfig& head_cfg,
                     const TrainConfig& cfg, const EdgeSplit& split,
                     const EvalConfig& eval_cfg) {
  cfg.validate();
  auto trainable = params.trainable();
  auto opt_state = OptimizerState<T>::for_params(trainable);
  MinibatchSampler sampler(split.train, std::min<int64_t>(cfg.batch_size,
                                                          static_cast<int64_t>(split.train.size())),
                           cfg.seed);

  // Without trainable parameters the encoder is static; one epoch measures it.
  const int64_t epochs = trainable.empty() ? 1 : cfg.max_epochs;

  TrainResult<T> result;
  result.best_params = params.clone();
  result.best_val_recall = -1.0;
  int64_t since_best = 0;

  EvalConfig val_cfg = eval_cfg;
  val_cfg.k = cfg.val_k;

  for (int64_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (const auto& batch : sampler.epoch()) {
      const uint64_t dropout_seed = sampler.draw_seed();
      Tape<T> tape;
      tape.set_enabled(!trainable.empty());
      Tensor<T> all = model_forward(tape, g, h0, params, waml_cfg, head_cfg, true, dropout_seed);
      std::vector<int64_t> seller_idx, product_idx;
      seller_idx.reserve(batch.size());
      product_idx.reserve(batch.size());
      for (auto [s, p] : batch) {
        seller_idx.push_back(static_cast<int64_t>(s));
        product_idx.push_back(static_cast<int64_t>(p));
      }
      Tensor<T> es = gather_rows(tape, all, seller_idx);
      Tensor<T> ep = gather_rows(tape, all, product_idx);
      Tensor<T> loss;
      try {
        loss = cfg.loss == LossKind::Contrastive
                   ? contrastive_loss(tape, es, ep, cfg.temperature, cfg.symmetric)
                   : triplet_loss(tape, es, ep, cfg.triplet_margin);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
      loss_count += static_cast<int64_t>(batch.size());
      if (!trainable.empty()) {
        tape.backward(loss);
        adamw_step(trainable, opt_state, cfg);
        for (auto& t : trainable) t.zero_grad();
      }
    }

    EmbeddingTable table = encode_all(g, h0, params, waml_cfg, head_cfg);
    EvalReport val = split.validation.empty()
                         ? EvalReport{}
                         : evaluate_retrieval(g, table, split.validation, val_cfg, split.train);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back({epoch, loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count),
                          val.recall, wall});

    if (val.recall > result.best_val_recall) {
      result.best_val_recall = val.recall;
      result.best_epoch = epoch;
      result.best_params = params.clone();
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.patience) break;
    }
  }
  return result;
}

}  // namespace waml
