#include "waml/pipeline.hpp"

#include "waml/pipeline_detail.hpp"

namespace waml {

ExperimentResult run_synthetic_experiment(const SynthDataset& data, const RunConfig& cfg) {
  return detail::run_synthetic_experiment_impl<float>(data, cfg);
}

void apply_ladder_base(RunConfig& cfg) {
  cfg.features.content_source = ContentSource::Zeros;
  cfg.features.use_id_hash = true;  // stands in for per-node embeddings
  cfg.features.use_type_hash = false;
  cfg.waml.aggregator = Aggregator::Waml;
  cfg.waml.l2_normalize = false;
  cfg.waml.alpha_mode = AlphaMode::Fixed;
  cfg.waml.alphas.assign(static_cast<size_t>(cfg.waml.layers), 0.5);
  cfg.head.layers = 0;
  cfg.head.final_l2_norm = false;
  cfg.train.loss = LossKind::Triplet;
}

std::vector<AblationRow> ablation_ladder() {
  return {
      {"base", [](RunConfig& cfg) { apply_ladder_base(cfg); }},
      {"+content", [](RunConfig& cfg) { cfg.features.content_source = ContentSource::PrecomputedFile; }},
      {"+type-hash", [](RunConfig& cfg) { cfg.features.use_type_hash = true; }},
      {"+l2-norm-waml", [](RunConfig& cfg) { cfg.waml.l2_normalize = true; }},
      {"+tuned-alpha",
       [](RunConfig& cfg) {
         cfg.waml.alphas = {0.4, 0.45, 0.5, 0.6, 0.7};
         cfg.waml.alphas.resize(static_cast<size_t>(cfg.waml.layers), 0.7);
       }},
      {"+ffn",
       [](RunConfig& cfg) {
         cfg.head.layers = 3;
         cfg.head.beta_trainable = false;
       }},
      {"+tuned-beta", [](RunConfig& cfg) { cfg.head.beta_trainable = true; }},
      {"+contrastive", [](RunConfig& cfg) { cfg.train.loss = LossKind::Contrastive; }},
      {"+output-l2", [](RunConfig& cfg) { cfg.head.final_l2_norm = true; }},
  };
}

}  // namespace waml
