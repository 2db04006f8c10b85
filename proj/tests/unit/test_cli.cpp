// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "agat/run.hpp"
#include "helpers.hpp"

using namespace agat;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSyntheticRun =
    "model.image_size = 8\nmodel.patch_size = 4\nmodel.dim = 16\nmodel.heads = 2\n"
    "model.depth = 2\nmodel.num_classes = 3\n"
    "data.kind = synthetic\ndata.synthetic_train = 24\ndata.synthetic_test = 12\n"
    "train.epochs = 2\ntrain.warmup_epochs = 1\ntrain.batch_size = 8\ntrain.wall_clock = false\n"
    "attack.epsilon = 0.05\neval_attack.epsilon = 0.05\neval_attack.steps = 2\n"
    "eval.final_pgd_steps = 3\npolicy = agat\npolicy.keep = 0.5\n";

struct Io {
  std::ostringstream out, err;
  CommandIo io() { return {out, err}; }
};

}  // namespace

TEST_CASE("flops subcommand prints the report") {
  Io io;
  const int rc = cmd_flops(test::source_dir() / "configs" / "vit_base.cfg", {"policy=agat", "policy.keep=0.9"}, io.io());
  CHECK(rc == kExitOk);
  CHECK(io.out.str().find("total: 10327950336") != std::string::npos);
  CHECK(io.out.str().find("baseline: 17451085824") != std::string::npos);
}

TEST_CASE("gradcheck negative control fails") {
  Io ok, bad, unknown;
  GradcheckSpec spec;
  spec.seeds = 2;
  spec.overrides = {"gradcheck.samples=32"};
  CHECK(cmd_gradcheck(spec, ok.io()) == kExitOk);
  spec.corrupt = "layer_norm";
  CHECK(cmd_gradcheck(spec, bad.io()) == kExitFailure);
  CHECK(bad.out.str().find("FAIL") != std::string::npos);
  spec.corrupt = "no_such_op";
  CHECK(cmd_gradcheck(spec, unknown.io()) == kExitConfig);
}

TEST_CASE("config and data errors map to exit codes") {
  Io io;
  CHECK(cmd_train(std::nullopt, {"data.train_images=/no/such/file"}, io.io()) == kExitConfig);
  CHECK(io.err.str().rfind("error[config]:", 0) == 0);
  CHECK(io.err.str().find("/no/such/file") != std::string::npos);

  Io sweep;
  CHECK(cmd_sweep(std::nullopt, {}, {}, {0}, sweep.io()) == kExitConfig);

  Io unknown;
  CHECK(cmd_flops(std::nullopt, {"model.nope=1"}, unknown.io()) == kExitConfig);

  const auto dir = test::scratch_dir("cli-data");
  std::ofstream(dir / "img") << "garbage";
  std::ofstream(dir / "lab") << "garbage";
  Io data;
  const std::string img = (dir / "img").string(), lab = (dir / "lab").string();
  CHECK(cmd_train(std::nullopt,
                  {"data.train_images=" + img, "data.train_labels=" + lab, "data.test_images=" + img,
                   "data.test_labels=" + lab},
                  data.io()) == kExitData);
}

TEST_CASE("train, rerun and eval through the subcommands") {
  const auto root = test::scratch_dir("cli-run");
  ::setenv("AGAT_OUTPUT_ROOT", root.c_str(), 1);
  std::ofstream(root / "run.cfg") << kSyntheticRun;

  Io first, second;
  REQUIRE(cmd_train(root / "run.cfg", {"output.dir=a"}, first.io()) == kExitOk);
  REQUIRE(cmd_train(root / "run.cfg", {"output.dir=b"}, second.io()) == kExitOk);
  for (const char* f : {"metrics.csv", "plot.jsonl", "final_eval.json", "epoch-2.ckpt", "final.ckpt"}) {
    CAPTURE(f);
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  CHECK(fs::exists(root / "a" / "manifest.json"));
  CHECK(slurp(root / "a" / "metrics.csv").rfind(kMetricsHeader, 0) == 0);

  Io eval;
  EvalSpec spec;
  spec.steps = 2;
  spec.epsilon = 0.05;
  CHECK(cmd_eval(root / "a" / "final.ckpt", spec, eval.io()) == kExitOk);
  CHECK(eval.out.str().find("examples 12") != std::string::npos);

  auto bytes = slurp(root / "a" / "final.ckpt");
  bytes[bytes.size() / 3] ^= 0x01;
  std::ofstream(root / "a" / "broken.ckpt", std::ios::binary) << bytes;
  Io broken;
  CHECK(cmd_eval(root / "a" / "broken.ckpt", spec, broken.io()) == kExitCheckpoint);
  CHECK(broken.err.str().rfind("error[checkpoint]:", 0) == 0);
  ::unsetenv("AGAT_OUTPUT_ROOT");
}

TEST_CASE("sweep trains each distinct configuration once") {
  const auto root = test::scratch_dir("cli-sweep");
  RunConfig cfg = RunConfig::from_key_values(KeyValues::parse(kSyntheticRun));
  cfg.train.epochs = 1;
  cfg.train.warmup_epochs = 0;
  cfg.final_pgd_steps.clear();
  const auto data = load_datasets(cfg.data, cfg.model);
  std::ostringstream log;
  const auto rows = run_sweep(cfg, data, {0.0, 0.3}, {0}, root, &log);
  REQUIRE(rows.size() == 4);
  // The two zero-reduction rows share one run.
  CHECK(rows[0].robust_acc == rows[2].robust_acc);
  std::size_t runs = 0;
  for (std::size_t pos = 0; (pos = log.str().find("sweep run", pos)) != std::string::npos; ++pos) ++runs;
  CHECK(runs == 3);
  CHECK(fs::exists(root / "sweep.csv"));
  CHECK(sweep_table(rows).find("agat") != std::string::npos);
}
