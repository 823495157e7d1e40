#include "waml/config.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace waml;

TEST_CASE("config set/get round trip") {
  RunConfig cfg;
  cfg.set("train.seed", "99");
  cfg.set("waml.alphas", "0.1, 0.2, 0.3");
  cfg.set("waml.layers", "3");
  cfg.set("features.content_source", "file");
  cfg.set("train.loss", "triplet");
  cfg.set("head.final_l2_norm", "false");

  CHECK(cfg.train.seed == 99);
  CHECK(cfg.waml.alphas == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(cfg.features.content_source == ContentSource::PrecomputedFile);
  CHECK(cfg.train.loss == LossKind::Triplet);
  CHECK_FALSE(cfg.head.final_l2_norm);

  CHECK(cfg.get("train.seed") == "99");
  CHECK(cfg.get("train.loss") == "triplet");
}

TEST_CASE("unknown keys and malformed values are config errors") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("nope.nothing", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.seed", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("head.final_l2_norm", "maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.set("waml.aggregator", "gat"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_line("train.seed 7", "test"), ConfigError);
}

TEST_CASE("echo round trips through from_echo") {
  RunConfig cfg;
  cfg.set("train.seed", "1234");
  cfg.set("features.dim", "48");
  cfg.set("waml.layers", "2");
  cfg.set("waml.alphas", "0.25,0.75");
  cfg.set("train.split", "0.6,0.2,0.2");
  cfg.set("eval.scope", "all-products");

  RunConfig back = RunConfig::from_echo(cfg.echo());
  CHECK(back.echo() == cfg.echo());
  CHECK(back.train.seed == 1234);
  CHECK(back.features.dim == 48);
  CHECK(back.waml.alphas == std::vector<double>{0.25, 0.75});
  CHECK(back.eval.scope == EvalScope::AllProducts);
}

TEST_CASE("config files support comments and blank lines") {
  auto path = (std::filesystem::temp_directory_path() / "waml_test.cfg").string();
  {
    std::ofstream os(path);
    os << "# experiment settings\n";
    os << "\n";
    os << "train.seed = 7\n";
    os << "features.dim = 16   \n";
    os << "waml.aggregator = lightgcn-sum\n";
  }
  RunConfig cfg;
  cfg.load_file(path);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.features.dim == 16);
  CHECK(cfg.waml.aggregator == Aggregator::LightGcnSum);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(cfg.load_file("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
  RunConfig cfg;
  cfg.set("train.temperature", "0");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  RunConfig cfg2;
  cfg2.set("waml.layers", "2");  // alphas still has 5 entries
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);

  RunConfig cfg3;
  cfg3.set("head.dropout", "1.0");
  CHECK_THROWS_AS(cfg3.validate(), ConfigError);
}
