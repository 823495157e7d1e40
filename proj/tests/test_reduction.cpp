#include "waml/reduction.hpp"

#include <set>

#include "doctest.h"
#include "oracles/instance_gen.hpp"
#include "oracles/reduction_oracle.hpp"
#include "oracles/toy_fixture.hpp"

using namespace waml;

namespace {

using testgen::Instance;
using testgen::graph_as_sets;
using testgen::matches_oracle;
using testgen::random_instance;

}  // namespace

TEST_CASE("co-purchase projection counts customer-wise pairs") {
  // Two customers each touching both products: one pair, count 2.
  auto pp = project_copurchase({{0, 10}, {0, 11}, {1, 10}, {1, 11}});
  REQUIRE(pp.size() == 1);
  CHECK(pp[0] == WeightedEdge{10, 11, 2});

  // A single product yields no pair.
  CHECK(project_copurchase({{0, 10}}).empty());
  CHECK(project_copurchase({}).empty());

  // Duplicate (customer, product) interactions count once.
  auto dup = project_copurchase({{0, 10}, {0, 10}, {0, 11}});
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].count == 1);
}

TEST_CASE("projection matches the pair-enumeration oracle on random input") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<int64_t, int64_t>> cp;
    for (int i = 0; i < 40; ++i) {
      cp.push_back({static_cast<int64_t>(rng.below(6)), static_cast<int64_t>(rng.below(8))});
    }
    // Brute force: count unordered pairs per customer over distinct sets.
    std::map<std::pair<int64_t, int64_t>, int64_t> expected;
    for (int64_t c = 0; c < 6; ++c) {
      std::set<int64_t> touched;
      for (auto [cc, p] : cp) {
        if (cc == c) touched.insert(p);
      }
      for (int64_t p : touched) {
        for (int64_t q : touched) {
          if (p < q) expected[{p, q}]++;
        }
      }
    }
    auto got = project_copurchase(cp);
    REQUIRE(got.size() == expected.size());
    for (const auto& e : got) {
      CHECK(expected.at({e.u, e.v}) == e.count);
    }
  }
}

TEST_CASE("customer degree cap skips overly connected customers") {
  std::vector<std::pair<int64_t, int64_t>> cp;
  for (int64_t p = 0; p < 5; ++p) cp.push_back({0, p});  // customer 0 touches 5 products
  cp.push_back({1, 0});
  cp.push_back({1, 1});
  CHECK(project_copurchase(cp).size() == 10 + 1);
  auto capped = project_copurchase(cp, 4);
  REQUIRE(capped.size() == 1);
  CHECK(capped[0] == WeightedEdge{0, 1, 1});
}

TEST_CASE("threshold filter") {
  std::vector<WeightedEdge> pp = {{0, 1, 2}, {0, 2, 1}};
  auto kept = threshold_filter(pp, 2);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == WeightedEdge{0, 1, 2});

  CHECK(threshold_filter(pp, 1) == pp);  // t=1 is the identity

  Rng rng(7);
  std::vector<WeightedEdge> many;
  for (int64_t i = 0; i < 200; ++i) {
    many.push_back({i, i + 200, 1 + static_cast<int64_t>(rng.below(9))});
  }
  auto got = threshold_filter(many, 5);
  std::vector<WeightedEdge> expected;
  for (const auto& e : many) {
    if (e.count >= 5) expected.push_back(e);
  }
  CHECK(got == expected);
}

TEST_CASE("candidate filter keeps candidate-touching edges and isolated candidates") {
  std::vector<WeightedEdge> pp = {{1, 2, 3}, {2, 3, 3}};
  auto r = candidate_filter(pp, {1});
  REQUIRE(r.edges.size() == 1);
  CHECK(r.edges[0].u == 1);
  CHECK(r.training_set == std::vector<int64_t>{1, 2});

  // All products candidates: identity on edges.
  auto all = candidate_filter(pp, {1, 2, 3});
  CHECK(all.edges == pp);
  CHECK(all.training_set == std::vector<int64_t>{1, 2, 3});

  // Isolated candidate stays in the training set.
  auto iso = candidate_filter({}, {42});
  CHECK(iso.edges.empty());
  CHECK(iso.training_set == std::vector<int64_t>{42});
}

TEST_CASE("attached-edge restriction") {
  std::vector<std::pair<int64_t, int64_t>> sp = {{0, 1}, {0, 9}};
  auto kept = restrict_attached_edges(sp, {1});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == std::pair<int64_t, int64_t>{0, 1});
  CHECK(restrict_attached_edges(sp, {}).empty());

  Rng rng(3);
  std::vector<std::pair<int64_t, int64_t>> edges;
  std::unordered_set<int64_t> pt;
  for (int64_t i = 0; i < 200; ++i) {
    edges.push_back({static_cast<int64_t>(rng.below(20)), static_cast<int64_t>(rng.below(50))});
  }
  for (int64_t p = 0; p < 50; ++p) {
    if (rng.real() < 0.5) pt.insert(p);
  }
  auto got = restrict_attached_edges(edges, pt);
  std::vector<std::pair<int64_t, int64_t>> expected;
  for (auto& e : edges) {
    if (pt.count(e.second)) expected.push_back(e);
  }
  CHECK(got == expected);
}

TEST_CASE("toy example reduces to the expected final graph, stage by stage") {
  ReductionConfig cfg;
  cfg.cooccurrence_threshold = 2;
  cfg.candidate_set = toy::candidates();
  auto [graph, report] = reduce_pipeline(toy::nodes(), toy::edges(), cfg);

  auto got = graph_as_sets(graph);
  CHECK(got.product_product == toy::expected_pp());
  CHECK(got.seller_product == toy::expected_sp());
  CHECK(got.category_product == toy::expected_ap());

  std::set<std::string> all_nodes;
  for (int64_t v = 0; v < graph.node_count(); ++v) {
    all_nodes.insert(graph.raw_id(v));
    CHECK(graph.type_of(v) != NodeType::Customer);
  }
  CHECK(all_nodes == toy::expected_nodes());

  CHECK(report.counts.at("customers_before") == 5);
  CHECK(report.counts.at("customers_after") == 0);
  CHECK(report.counts.at("edges_product_product_projected") == 3);
  CHECK(report.counts.at("edges_product_product_thresholded") == 2);
  CHECK(report.counts.at("edges_product_product_after") == 1);
  CHECK(report.counts.at("training_products") == 3);
  CHECK(report.counts.at("edges_seller_product_after") == 2);
  CHECK(report.counts.at("edges_category_product_after") == 2);
}

TEST_CASE("zero customers: seller and category edges filter against the candidate set") {
  std::vector<NodeRef> nodes = {{"p1", NodeType::Product},
                                {"p2", NodeType::Product},
                                {"s1", NodeType::Seller},
                                {"a1", NodeType::Category}};
  std::vector<RawEdge> edges = {{"s1", "p1", EdgeType::SellerProduct},
                                {"s1", "p2", EdgeType::SellerProduct},
                                {"a1", "p2", EdgeType::CategoryProduct}};
  ReductionConfig cfg;
  cfg.cooccurrence_threshold = 2;
  cfg.candidate_set = {"p1"};
  auto [graph, report] = reduce_pipeline(nodes, edges, cfg);
  CHECK(graph.edge_set(EdgeType::ProductProduct).empty());
  CHECK(graph.edge_set(EdgeType::SellerProduct).size() == 1);
  CHECK(graph.edge_set(EdgeType::CategoryProduct).empty());
  CHECK(graph.count_of(NodeType::Product) == 1);  // training set == candidates
  CHECK(graph.count_of(NodeType::Seller) == 1);
  CHECK(graph.count_of(NodeType::Category) == 1);
}

TEST_CASE("pipeline equals the brute-force oracle on random instances") {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    CAPTURE(seed);
    CHECK(matches_oracle(random_instance(seed)));
  }
}

TEST_CASE("pipeline properties") {
  for (uint64_t seed = 100; seed < 120; ++seed) {
    CAPTURE(seed);
    Instance inst = random_instance(seed);
    auto [graph, report] = reduce_pipeline(inst.nodes, inst.edges, inst.config);

    // Every kept PP edge touches the candidate set.
    for (auto [u, v] : graph.edge_set(EdgeType::ProductProduct)) {
      CHECK((graph.is_candidate(u) || graph.is_candidate(v)));
    }
    // Candidates subset of training products subset of products.
    for (const auto& raw : inst.config.candidate_set) {
      CHECK(graph.find(NodeType::Product, raw).has_value());
    }
    CHECK(report.counts.at("training_products") <= report.counts.at("products_before"));
    CHECK(report.counts.at("candidate_products") <= report.counts.at("training_products"));

    // Monotonicity: raising the threshold never increases the kept sets.
    Instance higher = inst;
    higher.config.cooccurrence_threshold++;
    auto [graph2, report2] = reduce_pipeline(higher.nodes, higher.edges, higher.config);
    CHECK(report2.counts.at("edges_product_product_after") <=
          report.counts.at("edges_product_product_after"));
    CHECK(report2.counts.at("training_products") <= report.counts.at("training_products"));
  }
}

TEST_CASE("pipeline is idempotent on its own output") {
  for (uint64_t seed : {42u, 43u, 44u, 45u}) {
    CAPTURE(seed);
    Instance inst = random_instance(seed);
    auto [graph, report] = reduce_pipeline(inst.nodes, inst.edges, inst.config);

    std::vector<NodeRef> nodes2;
    std::vector<RawEdge> edges2;
    for (int64_t v = 0; v < graph.node_count(); ++v) {
      nodes2.push_back({graph.raw_id(v), graph.type_of(v)});
    }
    for (EdgeType t : {EdgeType::ProductProduct, EdgeType::SellerProduct, EdgeType::CategoryProduct}) {
      for (auto [u, v] : graph.edge_set(t)) {
        edges2.push_back({graph.raw_id(u), graph.raw_id(v), t});
      }
    }
    auto [graph2, report2] = reduce_pipeline(nodes2, edges2, inst.config);
    auto a = graph_as_sets(graph);
    auto b = graph_as_sets(graph2);
    CHECK(a.sellers == b.sellers);
    CHECK(a.categories == b.categories);
    CHECK(a.training_products == b.training_products);
    CHECK(a.product_product == b.product_product);
    CHECK(a.seller_product == b.seller_product);
    CHECK(a.category_product == b.category_product);
  }
}

TEST_CASE("reduction config validation") {
  ReductionConfig cfg;
  cfg.candidate_set = {"p1"};
  cfg.cooccurrence_threshold = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.cooccurrence_threshold = 1;
  cfg.candidate_set.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.candidate_set = {"zzz"};
  CHECK_THROWS_AS(reduce_pipeline({{"p1", NodeType::Product}}, {}, cfg), DataError);
}
