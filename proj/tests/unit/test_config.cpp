// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "agat/config.hpp"
#include "agat/error.hpp"
#include "agat/run.hpp"

using namespace agat;

TEST_CASE("parse key values") {
  const auto kv = KeyValues::parse("# header\nmodel.dim = 32  # trailing\n\n  train.seed=4\n");
  CHECK(kv.find("model.dim") == "32");
  CHECK(kv.find("train.seed") == "4");
  CHECK_FALSE(kv.has("x"));
  CHECK_THROWS_WITH_AS(KeyValues::parse("a = 1\na = 2\n", "f.cfg"), doctest::Contains("f.cfg:2"), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse("bad key! = 1\n"), ConfigError);
}

TEST_CASE("overrides replace values") {
  auto kv = KeyValues::parse("a = 1\n");
  kv.apply_override("a=2");
  kv.apply_override("b = x y");
  CHECK(kv.find("a") == "2");
  CHECK(kv.find("b") == "x y");
  CHECK(kv.to_text() == "a = 2\nb = x y\n");
}

TEST_CASE("typed reads") {
  const auto kv = KeyValues::parse("n = 12\nx = 0.25\nflag = true\nbad = 1.5\n");
  ConfigReader in(kv);
  CHECK(in.get_size("n", 0) == 12);
  CHECK(in.get_double("x", 0) == 0.25);
  CHECK(in.get_bool("flag", false));
  CHECK(in.get_size("missing", 9) == 9);
  CHECK_THROWS_AS(in.get_size("bad", 0), ConfigError);
  in.reject_unknown();
  ConfigReader partial(kv);
  partial.get_size("n", 0);
  CHECK_THROWS_WITH_AS(partial.reject_unknown(), doctest::Contains("unknown config key"), ConfigError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1e-8, 1.0 / 3.0, 123456789.0, 0.0}) {
    const auto text = format_double(v);
    CHECK(std::stod(text) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("run config round trip") {
  auto kv = KeyValues::parse(
      "data.kind = synthetic\nmodel.image_size = 8\nmodel.patch_size = 2\nmodel.dim = 16\n"
      "model.heads = 2\nmodel.depth = 2\nmodel.num_classes = 3\npolicy = agat\npolicy.reduction = 0.3\n"
      "train.epochs = 4\ntrain.warmup_epochs = 1\n");
  const auto cfg = RunConfig::from_key_values(kv);
  CHECK(cfg.train.policy.kind == DropPolicy::Kind::attention_guided);
  CHECK(cfg.train.policy.keep < 1.0);
  CHECK(cfg.train.eval_attack.steps == 10);
  CHECK(cfg.train.eval_attack.alpha == doctest::Approx(0.02));
  CHECK(cfg.train.attack.alpha == doctest::Approx(0.125));
  const auto again = RunConfig::from_key_values(cfg.to_key_values());
  CHECK(again.train == cfg.train);
  CHECK(again.model == cfg.model);
  CHECK(again.data == cfg.data);
  CHECK(again.to_key_values().to_text() == cfg.to_key_values().to_text());
}

TEST_CASE("run config rejects bad input") {
  CHECK_THROWS_WITH_AS(RunConfig::from_key_values(KeyValues::parse("model.dimm = 3\n"), false),
                       doctest::Contains("model.dimm"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_key_values(KeyValues::parse("model.dim = 30\nmodel.heads = 4\n"), false),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_key_values(KeyValues::parse("attack.steps = 3\n"), false), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_key_values(KeyValues::parse("policy = topk\n"), false), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_key_values(KeyValues::parse("train.warmup_epochs = 40\n"), false),
                  ConfigError);
  CHECK_THROWS_WITH_AS(
      RunConfig::from_key_values(KeyValues::parse("data.train_images = /nowhere/imgs\n"), true),
      doctest::Contains("/nowhere/imgs"), ConfigError);
}
