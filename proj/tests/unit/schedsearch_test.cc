#include <doctest.h>

#include <cmath>
#include <random>

#include "hercules/catalog.h"
#include "hercules/error.h"
#include "hercules/schedsearch.h"

using namespace hercules;

namespace {

SchedConfig at(int m, int o, int d) {
  SchedConfig c;
  c.host = {m, o, d};
  return c;
}

int level(int d) { return static_cast<int>(std::lround(std::log2(d / 16.0))); }

}  // namespace

TEST_CASE("candidate moves") {
  const ServerSpec t2 = builtin_catalog().server("T2");
  CHECK(candidate_moves(at(1, 1, 16), 1, t2).size() == 3);
  const auto edge = candidate_moves(at(20, 1, 16), 1, t2);
  CHECK(edge.size() <= 2);
  for (const auto& c : edge) CHECK(c.host.m <= 20);
  CHECK(candidate_moves(at(20, 1, 4096), 1, t2).empty());
  CHECK_THROWS_AS(candidate_moves(at(1, 1, 16), 0, t2), PreconditionError);
}

TEST_CASE("unimodality checker") {
  CHECK(unimodal({}));
  CHECK(unimodal({0, 0, 1, 3, 2, 2, 0}));
  CHECK(unimodal({5, 4, 4, 1}));
  CHECK_FALSE(unimodal({1, 3, 2, 4}));
  CHECK_FALSE(unimodal({0, 1, 0, 1}));
  CHECK_FALSE(unimodal({1, 1, 2}));
  CHECK_FALSE(unimodal({10, 9, 9.000001}));
  CHECK(unimodal({10, 9, 9.000001}, 1e-6));
  CHECK_FALSE(unimodal({10, 9, 9.1}, 1e-6));
  CHECK(unimodal_2d({{1, 2, 1}, {2, 3, 2}, {1, 2, 1}}));
  CHECK_FALSE(unimodal_2d({{1, 2, 3}, {4, 3, 2}}));
}

TEST_CASE("search on synthetic concave surfaces matches the exhaustive oracle") {
  const Catalog cat = builtin_catalog();
  const ModelSpec& model = cat.model("DLRM-RMC1");
  const ServerSpec& t2 = cat.server("T2");
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int matched = 0;
  const int n = 40;
  for (int k = 0; k < n; ++k) {
    const double m0 = 1 + 14 * u(rng) + 0.37, d0 = 7 * u(rng) + 0.21, o0 = 1 + 2 * u(rng) + 0.13;
    const double a = 0.5 + u(rng), b = 2 + 4 * u(rng), c = 20 + 20 * u(rng);
    SearchRequest req;
    req.model = &model;
    req.server = &t2;
    req.strategy = enumerate_strategies(model, t2)[0];
    req.sla_ms = 1;
    req.space.batch_levels = 8;
    req.surface = [=](const SchedConfig& cfg) {
      const double dm = cfg.host.m - m0, dd = level(cfg.host.d) - d0, dob = cfg.host.o - o0;
      PointEval p;
      p.qps = 1000 - a * dm * dm - b * dd * dd - c * dob * dob;
      p.valid = p.qps > 0;
      p.qps = std::max(0.0, p.qps);
      p.power_w = 100;
      return p;
    };
    Surface s;
    const auto oracle = brute_force_search(req, &s);
    REQUIRE(check_surface(s).ok());
    const auto got = gradient_search(req);
    matched += got.cfg == oracle.cfg;
    CHECK(got.qps == oracle.qps);
    CHECK(static_cast<double>(got.evaluations) <= 0.3 * grid_size(req));
  }
  CHECK(matched == n);
}

TEST_CASE("degenerate grids") {
  const Catalog cat = builtin_catalog();
  const ModelSpec& model = cat.model("DLRM-RMC1");
  const ServerSpec& t2 = cat.server("T2");
  SearchRequest req;
  req.model = &model;
  req.server = &t2;
  req.strategy = enumerate_strategies(model, t2)[0];
  req.sla_ms = 100;
  req.space.max_cores = 1;
  req.space.batch_levels = 1;
  CHECK(grid_size(req) == 1);
  const auto g = gradient_search(req);
  const auto b = brute_force_search(req);
  CHECK(g.cfg == b.cfg);
  CHECK(g.cfg.host == HostCfg{1, 1, 16});

  req.space = {};
  req.sla_ms = 1e-6;
  const auto none = gradient_search(req);
  CHECK(none.violation);
  CHECK(none.qps == 0);
  CHECK(brute_force_search(req).violation);
}

TEST_CASE("exhaustive search never loses to hill climbing") {
  const Catalog cat = builtin_catalog();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 12; ++k) {
    const ModelSpec& model = cat.models[rng() % cat.models.size()];
    const ServerSpec& server = cat.server(k % 2 ? "T2" : "T4");
    for (const auto& st : enumerate_strategies(model, server)) {
      SearchRequest req;
      req.model = &model;
      req.server = &server;
      req.strategy = st;
      req.sla_ms = model.sla_ms * (0.5 + 0.2 * k);
      req.space.batch_levels = 6;
      CHECK(brute_force_search(req).qps >= gradient_search(req).qps);
    }
  }
}

TEST_CASE("profile table") {
  const Catalog cat = builtin_catalog();
  ProfileOptions opt;
  opt.jobs = 1;
  const auto t = profile_all({cat.model("DLRM-RMC1"), cat.model("MT-WnD")}, {cat.server("T2"), cat.server("T5")}, opt);
  REQUIRE(t.entries.size() == 4);
  const auto* a = t.find("DLRM-RMC1", "T2");
  REQUIRE(a);
  CHECK(a->qps > 0);
  CHECK_FALSE(a->violation);
  // One-hot model on NMP: same QPS, lower QPS/W.
  const auto* w2 = t.find("MT-WnD", "T2");
  const auto* w5 = t.find("MT-WnD", "T5");
  CHECK(w5->qps == doctest::Approx(w2->qps).epsilon(1e-9));
  CHECK(w5->qps_per_watt() < w2->qps_per_watt());
  const auto back = EfficiencyTable::parse(t.serialize());
  REQUIRE(back.entries.size() == t.entries.size());
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    CHECK(back.entries[i].qps == t.entries[i].qps);
    CHECK(back.entries[i].power_w == t.entries[i].power_w);
    CHECK(back.entries[i].cfg == t.entries[i].cfg);
    CHECK(back.entries[i].strategy == t.entries[i].strategy);
  }
  CHECK(back.serialize().serialize() == t.serialize().serialize());
  opt.jobs = 3;
  CHECK(profile_all({cat.model("DLRM-RMC1"), cat.model("MT-WnD")}, {cat.server("T2"), cat.server("T5")}, opt)
            .serialize()
            .serialize() == t.serialize().serialize());
}
