#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hercules/catalog.h"
#include "hercules/error.h"
#include "hercules/kvtext.h"

using namespace hercules;

TEST_CASE("kv document round-trips sections and numbers") {
  const std::string text =
      "# comment\n[model X]\nnum_emb_tables = 10\nbottom_fc = 256-128-32\nrate = 1.5K\n\n[flags]\non = true\n";
  const auto doc = kv::Document::parse(text);
  REQUIRE(doc.sections().size() == 2);
  const auto* m = doc.find("model", "X");
  REQUIRE(m);
  CHECK(m->require_int("num_emb_tables") == 10);
  CHECK(m->require_double("rate") == doctest::Approx(1500.0));
  CHECK(kv::parse_dash_list(m->require_string("bottom_fc"), "bottom_fc", 0) ==
        std::vector<std::int64_t>{256, 128, 32});
  CHECK(doc.find("flags")->require_bool("on"));
  const auto again = kv::Document::parse(doc.serialize());
  CHECK(again.serialize() == doc.serialize());
}

TEST_CASE("kv errors name the field and line") {
  try {
    kv::Document::parse("[a]\nx = 1\nx = 2\n");
    FAIL("duplicate key accepted");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(e.field() == "x");
  }
  const auto doc = kv::Document::parse("[a]\nn = abc\n");
  try {
    doc.find("a")->require_int("n");
    FAIL("bad integer accepted");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(kv::Document::parse("[unterminated\n"), ConfigError);
}

TEST_CASE("format_number round-trips doubles") {
  for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 12345.678901234567, 1e-300, 6.02e23}) {
    CHECK(kv::parse_number(kv::format_number(v), "v", 0) == v);
  }
}

TEST_CASE("builtin catalogs") {
  const Catalog c = builtin_catalog();
  CHECK(c.models.size() == 6);
  CHECK(c.servers.size() == 10);
  const ServerSpec& t7 = c.server("T7");
  REQUIRE(t7.accel);
  CHECK(t7.accel->hbm_gb == 16);
  CHECK(t7.accel->pcie_gbps == 16);
  const ServerSpec& t2 = c.server("T2");
  CHECK(t2.cpu.cores == 20);
  CHECK(t2.cpu.freq_ghz == 2.0);
  CHECK(t2.cpu.tdp_w == 125);
  CHECK(c.model("DLRM-RMC3").bottom_fc == std::vector<std::int64_t>{2560, 512, 32});
  CHECK(c.model("RMC3").name == "DLRM-RMC3");
  CHECK_THROWS_AS(c.model("nope"), ConfigError);
  for (const auto& m : c.models) CHECK_NOTHROW(validate(m));
  for (const auto& s : c.servers) CHECK_NOTHROW(validate(s));
}

TEST_CASE("footprints") {
  const Catalog c = builtin_catalog();
  for (const auto& m : c.models) {
    CHECK(model_footprint(m, SizeClass::kProd).embedding_share() >= 0.95);
  }
  ModelSpec one = c.model("DLRM-RMC1");
  one.num_emb_tables = 1;
  one.emb_rows_prod = {1e6, 1e6};
  one.emb_dim = 32;
  const Footprint f = model_footprint(one, SizeClass::kProd, 4);
  CHECK(f.embedding_bytes == doctest::Approx(128e6));
  const Footprint rmc3 = model_footprint(c.model("DLRM-RMC3"), SizeClass::kProd, 4);
  CHECK(rmc3.embedding_bytes == doctest::Approx(10 * 15e6 * 32 * 4));
  ModelSpec none = one;
  none.num_emb_tables = 0;
  none.seq_tables = 0;
  CHECK(model_footprint(none, SizeClass::kProd).embedding_bytes == 0.0);
  CHECK(model_footprint(none, SizeClass::kProd).dense_bytes == doctest::Approx(none.dense_weights() * 4));
}

TEST_CASE("catalog overrides and serialization") {
  const Catalog base = builtin_catalog();
  CHECK(apply_catalog_overrides(base, kv::Document::parse("")) == base);
  CHECK(parse_catalog(serialize_catalog(base).serialize()) == base);
  const auto doc = kv::Document::parse("[server T2]\navailability = 3\n");
  const Catalog c = apply_catalog_overrides(base, doc);
  CHECK(c.server("T2").availability == 3);
  CHECK(c.server("T3") == base.server("T3"));
  CHECK_THROWS_AS(apply_catalog_overrides(base, kv::Document::parse("[server T2]\ncores_typo = 3\n")),
                  ConfigError);
}
