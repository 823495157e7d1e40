#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "waml/features.hpp"
#include "waml/model.hpp"
#include "waml/trainer.hpp"

namespace waml {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int64_t entries_checked = 0;
  std::string worst_param;

  bool passed(double tol = 1e-4) const { return max_rel_err < tol; }
};

// Central finite differences against the tape gradients. `forward` must be a
// pure function of the parameter values: (Tape<double>&) -> scalar loss.
// Entries where |analytic| + |numeric| <= denom_floor are skipped.
template <typename F>
GradCheckReport finite_difference_check(F&& forward,
                                        const std::vector<std::pair<std::string, Tensor<double>>>& params,
                                        double step = 1e-5, double denom_floor = 1e-8) {
  for (auto& [name, p] : params) {
    Tensor<double> t = p;
    t.zero_grad();
  }
  Tape<double> tape;
  Tensor<double> loss = forward(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) {
    analytic.emplace_back(p.grad(), p.grad() + p.size());
  }

  Tape<double> quiet;
  quiet.set_enabled(false);
  auto eval = [&]() { return forward(quiet).item(); };

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<double> p = params[pi].second;
    for (int64_t i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + step;
      const double fp = eval();
      p.data()[i] = orig - step;
      const double fm = eval();
      p.data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double ana = analytic[pi][static_cast<size_t>(i)];
      const double denom = std::abs(ana) + std::abs(numeric);
      if (denom <= denom_floor) continue;
      const double rel = std::abs(ana - numeric) / denom;
      report.entries_checked++;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = params[pi].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

namespace detail {

// Six-node fixture: two sellers, three products, one category.
inline HeteroGraph gradcheck_graph() {
  std::vector<NodeRef> nodes = {
      {"s1", NodeType::Seller},  {"s2", NodeType::Seller},   {"p1", NodeType::Product},
      {"p2", NodeType::Product}, {"p3", NodeType::Product},  {"a1", NodeType::Category},
  };
  std::vector<RawEdge> edges = {
      {"s1", "p1", EdgeType::SellerProduct},  {"s2", "p2", EdgeType::SellerProduct},
      {"p1", "p2", EdgeType::ProductProduct}, {"p2", "p3", EdgeType::ProductProduct},
      {"a1", "p1", EdgeType::CategoryProduct}, {"a1", "p3", EdgeType::CategoryProduct},
  };
  return build_graph(nodes, edges, {"p1", "p2"});
}

}  // namespace detail

// The full composite at 64-bit: h0 -> 5 convolution layers -> 3 FFN layers ->
// in-batch contrastive loss at tau=0.1, on the built-in six-node graph.
// Dropout is off so the loss is a deterministic function of the parameters.
inline GradCheckReport composite_gradient_check(bool trainable_alpha = false, uint64_t seed = 7) {
  HeteroGraph g = detail::gradcheck_graph();

  FeatureConfig fcfg;
  fcfg.dim = 8;
  std::vector<std::pair<std::string, std::string>> texts = {
      {"p1", "alpine tent poles"}, {"p2", "camping tent"}, {"p3", "thermal flask"}};
  ContentTable content = ContentTable::from_texts(texts, fcfg.dim, fcfg.hash_seed);
  fcfg.content_source = ContentSource::TextStub;
  Tensor<double> h0 = init_h0<double>(g, fcfg, content);

  WamlConfig wcfg;
  wcfg.layers = 5;
  wcfg.alphas = {0.4, 0.45, 0.5, 0.6, 0.7};
  wcfg.alpha_mode = trainable_alpha ? AlphaMode::TrainableLogistic : AlphaMode::Fixed;

  HeadConfig hcfg;
  hcfg.layers = 3;
  hcfg.dropout_rate = 0.0;

  ModelParams<double> params = init_model<double>(fcfg.dim, wcfg, hcfg, seed);

  const std::vector<int64_t> sellers = {0, 1};   // s1, s2
  const std::vector<int64_t> products = {2, 3};  // p1, p2

  auto forward = [&](Tape<double>& tape) {
    Tensor<double> all = model_forward(tape, g, h0, params, wcfg, hcfg, false, 0);
    Tensor<double> es = gather_rows(tape, all, sellers);
    Tensor<double> ep = gather_rows(tape, all, products);
    return contrastive_loss(tape, es, ep, 0.1);
  };
  return finite_difference_check(forward, params.named());
}

}  // namespace waml
