#include "waml/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace waml {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

struct Entry {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> r;
    auto add_int = [&](const std::string& key, auto member) {
      r[key] = {[member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); },
                [member](RunConfig& c, const std::string& k, const std::string& v) {
                  std::invoke(member, c) = parse_int(k, v);
                }};
    };
    auto add_u64 = [&](const std::string& key, auto member) {
      r[key] = {[member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); },
                [member](RunConfig& c, const std::string& k, const std::string& v) {
                  std::invoke(member, c) = parse_u64(k, v);
                }};
    };
    auto add_double = [&](const std::string& key, auto member) {
      r[key] = {[member](const RunConfig& c) { return fmt_double(std::invoke(member, c)); },
                [member](RunConfig& c, const std::string& k, const std::string& v) {
                  std::invoke(member, c) = parse_double(k, v);
                }};
    };
    auto add_bool = [&](const std::string& key, auto member) {
      r[key] = {[member](const RunConfig& c) { return std::invoke(member, c) ? "true" : "false"; },
                [member](RunConfig& c, const std::string& k, const std::string& v) {
                  std::invoke(member, c) = parse_bool(k, v);
                }};
    };

    add_int("reduce.threshold", [](auto& c) -> auto& { return c.reduce.cooccurrence_threshold; });
    add_int("reduce.customer_degree_cap", [](auto& c) -> auto& { return c.reduce.customer_degree_cap; });

    add_int("features.dim", [](auto& c) -> auto& { return c.features.dim; });
    add_u64("features.hash_seed", [](auto& c) -> auto& { return c.features.hash_seed; });
    add_bool("features.use_id_hash", [](auto& c) -> auto& { return c.features.use_id_hash; });
    add_bool("features.use_type_hash", [](auto& c) -> auto& { return c.features.use_type_hash; });
    r["features.content_source"] = {
        [](const RunConfig& c) -> std::string {
          switch (c.features.content_source) {
            case ContentSource::PrecomputedFile: return "file";
            case ContentSource::TextStub: return "stub";
            case ContentSource::Zeros: return "zeros";
          }
          return "zeros";
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "file") c.features.content_source = ContentSource::PrecomputedFile;
          else if (v == "stub") c.features.content_source = ContentSource::TextStub;
          else if (v == "zeros") c.features.content_source = ContentSource::Zeros;
          else throw ConfigError("config key '" + k + "': expected file|stub|zeros");
        }};

    add_int("waml.layers", [](auto& c) -> auto& { return c.waml.layers; });
    r["waml.alphas"] = {[](const RunConfig& c) { return fmt_doubles(c.waml.alphas); },
                        [](RunConfig& c, const std::string& k, const std::string& v) {
                          c.waml.alphas = parse_doubles(k, v);
                        }};
    r["waml.alpha_mode"] = {
        [](const RunConfig& c) -> std::string {
          return c.waml.alpha_mode == AlphaMode::Fixed ? "fixed" : "trainable";
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "fixed") c.waml.alpha_mode = AlphaMode::Fixed;
          else if (v == "trainable") c.waml.alpha_mode = AlphaMode::TrainableLogistic;
          else throw ConfigError("config key '" + k + "': expected fixed|trainable");
        }};
    r["waml.aggregator"] = {
        [](const RunConfig& c) -> std::string {
          return c.waml.aggregator == Aggregator::Waml ? "waml" : "lightgcn-sum";
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "waml") c.waml.aggregator = Aggregator::Waml;
          else if (v == "lightgcn-sum") c.waml.aggregator = Aggregator::LightGcnSum;
          else throw ConfigError("config key '" + k + "': expected waml|lightgcn-sum");
        }};
    add_bool("waml.l2_normalize", [](auto& c) -> auto& { return c.waml.l2_normalize; });

    add_int("head.layers", [](auto& c) -> auto& { return c.head.layers; });
    add_double("head.beta_init", [](auto& c) -> auto& { return c.head.beta_init; });
    add_bool("head.beta_trainable", [](auto& c) -> auto& { return c.head.beta_trainable; });
    add_double("head.dropout", [](auto& c) -> auto& { return c.head.dropout_rate; });
    add_bool("head.final_l2_norm", [](auto& c) -> auto& { return c.head.final_l2_norm; });

    add_int("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    add_double("train.temperature", [](auto& c) -> auto& { return c.train.temperature; });
    add_double("train.learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; });
    add_double("train.weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; });
    add_double("train.adam_beta1", [](auto& c) -> auto& { return c.train.adam_beta1; });
    add_double("train.adam_beta2", [](auto& c) -> auto& { return c.train.adam_beta2; });
    add_double("train.adam_eps", [](auto& c) -> auto& { return c.train.adam_eps; });
    add_int("train.max_epochs", [](auto& c) -> auto& { return c.train.max_epochs; });
    add_int("train.patience", [](auto& c) -> auto& { return c.train.patience; });
    add_u64("train.seed", [](auto& c) -> auto& { return c.train.seed; });
    add_double("train.triplet_margin", [](auto& c) -> auto& { return c.train.triplet_margin; });
    add_bool("train.symmetric", [](auto& c) -> auto& { return c.train.symmetric; });
    add_int("train.val_k", [](auto& c) -> auto& { return c.train.val_k; });
    r["train.split"] = {
        [](const RunConfig& c) {
          return fmt_doubles({c.train.split_ratios[0], c.train.split_ratios[1], c.train.split_ratios[2]});
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          auto parts = parse_doubles(k, v);
          if (parts.size() != 3) throw ConfigError("config key '" + k + "': expected three ratios");
          c.train.split_ratios = {parts[0], parts[1], parts[2]};
        }};
    r["train.loss"] = {
        [](const RunConfig& c) -> std::string {
          return c.train.loss == LossKind::Contrastive ? "contrastive" : "triplet";
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "contrastive") c.train.loss = LossKind::Contrastive;
          else if (v == "triplet") c.train.loss = LossKind::Triplet;
          else throw ConfigError("config key '" + k + "': expected contrastive|triplet");
        }};

    add_int("eval.k", [](auto& c) -> auto& { return c.eval.k; });
    add_bool("eval.filter_seen", [](auto& c) -> auto& { return c.eval.filter_seen; });
    r["eval.scope"] = {
        [](const RunConfig& c) -> std::string {
          return c.eval.scope == EvalScope::Candidates ? "candidates" : "all-products";
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "candidates") c.eval.scope = EvalScope::Candidates;
          else if (v == "all-products") c.eval.scope = EvalScope::AllProducts;
          else throw ConfigError("config key '" + k + "': expected candidates|all-products");
        }};

    add_int("synth.clusters", [](auto& c) -> auto& { return c.synth.clusters; });
    add_int("synth.sellers_per_cluster", [](auto& c) -> auto& { return c.synth.sellers_per_cluster; });
    add_int("synth.products_per_cluster", [](auto& c) -> auto& { return c.synth.products_per_cluster; });
    add_double("synth.candidate_fraction", [](auto& c) -> auto& { return c.synth.candidate_fraction; });
    add_int("synth.customers", [](auto& c) -> auto& { return c.synth.customers; });
    add_int("synth.interactions_per_customer",
            [](auto& c) -> auto& { return c.synth.interactions_per_customer; });
    add_int("synth.warm_interactions_min", [](auto& c) -> auto& { return c.synth.warm_interactions_min; });
    add_int("synth.warm_interactions_max", [](auto& c) -> auto& { return c.synth.warm_interactions_max; });
    add_int("synth.vocab_size", [](auto& c) -> auto& { return c.synth.vocab_size; });
    add_int("synth.tokens_per_product", [](auto& c) -> auto& { return c.synth.tokens_per_product; });
    add_double("synth.noise_rate", [](auto& c) -> auto& { return c.synth.noise_rate; });
    add_u64("synth.seed", [](auto& c) -> auto& { return c.synth.seed; });
    r["synth.profile"] = {
        [](const RunConfig& c) {
          return fmt_doubles({c.synth.interaction_profile[0], c.synth.interaction_profile[1],
                              c.synth.interaction_profile[2]});
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          auto parts = parse_doubles(k, v);
          if (parts.size() != 3) throw ConfigError("config key '" + k + "': expected three proportions");
          c.synth.interaction_profile = {parts[0], parts[1], parts[2]};
        }};

    return r;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

void RunConfig::apply_line(const std::string& raw_line, const std::string& context) {
  std::string line = trim(raw_line);
  if (line.empty() || line[0] == '#') return;
  size_t eq = line.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(context + ": expected 'key = value', got '" + line + "'");
  }
  set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    apply_line(line, path + ":" + std::to_string(lineno));
  }
}

std::string RunConfig::echo() const {
  std::string out;
  for (auto& [key, entry] : registry()) {
    out += key;
    out += " = ";
    out += entry.get(*this);
    out += "\n";
  }
  return out;
}

RunConfig RunConfig::from_echo(const std::string& echo) {
  RunConfig cfg;
  std::istringstream is(echo);
  std::string line;
  while (std::getline(is, line)) {
    cfg.apply_line(line, "config echo");
  }
  return cfg;
}

}  // namespace waml
