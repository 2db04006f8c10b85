// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/run.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "agat/checkpoint.hpp"
#include "agat/error.hpp"
#include "agat/flops.hpp"
#include "agat/gradcheck.hpp"
#include "agat/kernels.hpp"

namespace agat {
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const auto b = item.find_last_not_of(" \t");
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError(key + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(key + ": no such file '" + path + "'");
}

std::string policy_tag(const DropPolicy& p) {
  switch (p.kind) {
    case DropPolicy::Kind::random_input: return "random";
    case DropPolicy::Kind::attention_guided: return "agat";
    default: return "none";
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

std::vector<fs::path> data_files(const DataConfig& d) {
  std::vector<fs::path> files;
  if (d.kind == "idx") {
    files = {d.train_images, d.train_labels, d.test_images, d.test_labels};
  } else if (d.kind == "cifar") {
    for (const auto& p : d.cifar_train) files.emplace_back(p);
    for (const auto& p : d.cifar_test) files.emplace_back(p);
  }
  return files;
}

nlohmann::ordered_json manifest(const RunConfig& cfg, const Datasets& data) {
  nlohmann::ordered_json m;
  m["program"] = "agat";
  m["version"] = kVersion;
  m["checkpoint_format"] = kCheckpointVersion;
  m["compiler"] = __VERSION__;
  m["threads"] = kernels::max_threads();
  m["seed"] = cfg.train.seed;
  nlohmann::ordered_json resolved = nlohmann::ordered_json::object();
  const KeyValues kv = cfg.to_key_values();
  for (const auto& [k, v] : kv.entries()) resolved[k] = v;
  m["config"] = resolved;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& f : data_files(cfg.data)) {
    std::ostringstream crc;
    crc << std::hex << std::setw(8) << std::setfill('0') << file_crc32(f);
    files.push_back({{"path", f.string()}, {"bytes", fs::file_size(f)}, {"crc32", crc.str()}});
  }
  m["data"] = {{"kind", cfg.data.kind},
               {"train_examples", data.train.size()},
               {"test_examples", data.test.size()},
               {"files", files}};
  return m;
}

}  // namespace

RunConfig RunConfig::from_key_values(const KeyValues& kv, bool check_data) {
  ConfigReader in(kv);
  RunConfig c;
  c.model = read_model_config(in);
  c.train = read_train_config(in);

  DataConfig& d = c.data;
  d.kind = in.get_string("data.kind", d.kind);
  d.train_images = in.get_string("data.train_images", "");
  d.train_labels = in.get_string("data.train_labels", "");
  d.test_images = in.get_string("data.test_images", "");
  d.test_labels = in.get_string("data.test_labels", "");
  d.cifar_train = split_list(in.get_string("data.cifar_train", ""));
  d.cifar_test = split_list(in.get_string("data.cifar_test", ""));
  d.train_limit = in.get_size("data.train_limit", d.train_limit);
  d.test_limit = in.get_size("data.test_limit", d.test_limit);
  d.synthetic_train = in.get_size("data.synthetic_train", d.synthetic_train);
  d.synthetic_test = in.get_size("data.synthetic_test", d.synthetic_test);
  d.synthetic_noise = in.get_double("data.synthetic_noise", d.synthetic_noise);
  d.synthetic_seed = in.get_u64("data.synthetic_seed", d.synthetic_seed);

  if (in.has("policy.reduction")) c.reduction = in.get_double("policy.reduction", 0.0);
  c.output_dir = in.get_string("output.dir", c.output_dir);
  c.eval_batch = in.get_size("eval.batch", c.eval_batch);
  if (const auto steps = in.get_optional("eval.final_pgd_steps")) {
    c.final_pgd_steps.clear();
    for (const auto& s : split_list(*steps)) {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || v == 0)
        throw ConfigError("eval.final_pgd_steps: expected positive integers, got '" + s + "'");
      c.final_pgd_steps.push_back(v);
    }
  }
  in.reject_unknown();

  if (c.eval_batch < 1) throw ConfigError("eval.batch must be at least 1");
  if (c.output_dir.empty()) throw ConfigError("output.dir must not be empty");
  if (d.kind == "idx") {
    if (check_data) {
      require_file("data.train_images", d.train_images);
      require_file("data.train_labels", d.train_labels);
      require_file("data.test_images", d.test_images);
      require_file("data.test_labels", d.test_labels);
    }
  } else if (d.kind == "cifar") {
    if (check_data) {
      if (d.cifar_train.empty()) throw ConfigError("data.cifar_train is required");
      if (d.cifar_test.empty()) throw ConfigError("data.cifar_test is required");
      for (const auto& p : d.cifar_train) require_file("data.cifar_train", p);
      for (const auto& p : d.cifar_test) require_file("data.cifar_test", p);
    }
  } else if (d.kind == "synthetic") {
    if (d.synthetic_train < 1 || d.synthetic_test < 1)
      throw ConfigError("synthetic datasets need at least one example per split");
    if (!(d.synthetic_noise >= 0.0)) throw ConfigError("data.synthetic_noise must be non-negative");
  } else {
    throw ConfigError("data.kind: expected idx, cifar or synthetic, got '" + d.kind + "'");
  }

  if (c.reduction) {
    const double r = *c.reduction;
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("policy.reduction must lie in [0, 1)");
    if (c.train.policy.kind == DropPolicy::Kind::none && r > 0.0)
      throw ConfigError("policy.reduction needs policy = random or agat");
    if (c.train.policy.kind != DropPolicy::Kind::none)
      c.train.policy = calibrate_policy(c.model, c.train.policy.kind, r).policy;
  }
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  write_model_config(kv, model);
  write_train_config(kv, train);
  kv.set("data.kind", data.kind);
  if (data.kind == "idx") {
    kv.set("data.train_images", data.train_images);
    kv.set("data.train_labels", data.train_labels);
    kv.set("data.test_images", data.test_images);
    kv.set("data.test_labels", data.test_labels);
  } else if (data.kind == "cifar") {
    kv.set("data.cifar_train", join(data.cifar_train));
    kv.set("data.cifar_test", join(data.cifar_test));
  } else {
    kv.set("data.synthetic_train", std::to_string(data.synthetic_train));
    kv.set("data.synthetic_test", std::to_string(data.synthetic_test));
    kv.set("data.synthetic_noise", format_double(data.synthetic_noise));
    kv.set("data.synthetic_seed", std::to_string(data.synthetic_seed));
  }
  kv.set("data.train_limit", std::to_string(data.train_limit));
  kv.set("data.test_limit", std::to_string(data.test_limit));
  kv.set("output.dir", output_dir);
  kv.set("eval.batch", std::to_string(eval_batch));
  std::vector<std::string> steps;
  for (auto s : final_pgd_steps) steps.push_back(std::to_string(s));
  kv.set("eval.final_pgd_steps", join(steps));
  return kv;
}

KeyValues gather_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
  KeyValues kv = path ? KeyValues::load(*path) : KeyValues{};
  for (const auto& o : overrides) kv.apply_override(o);
  return kv;
}

Datasets load_datasets(const DataConfig& d, const ModelConfig& model) {
  Datasets out;
  if (d.kind == "idx") {
    out.train = load_idx(d.train_images, d.train_labels);
    out.test = load_idx(d.test_images, d.test_labels);
  } else if (d.kind == "cifar") {
    std::vector<fs::path> train(d.cifar_train.begin(), d.cifar_train.end());
    std::vector<fs::path> test(d.cifar_test.begin(), d.cifar_test.end());
    out.train = load_cifar_binary(train);
    out.test = load_cifar_binary(test);
  } else {
    out.train = synthetic_blobs(d.synthetic_train, model.num_classes, model.image_size,
                                d.synthetic_seed, d.synthetic_noise, model.channels);
    out.test = synthetic_blobs(d.synthetic_test, model.num_classes, model.image_size,
                               d.synthetic_seed + 1, d.synthetic_noise, model.channels);
    out.test.split = "test";
  }
  out.train = out.train.head(d.train_limit);
  out.test = out.test.head(d.test_limit);
  for (const Dataset* ds : {&out.train, &out.test}) {
    if (ds->channels != model.channels || ds->height != model.image_size || ds->width != model.image_size)
      throw DataError(ds->split + " images are " + std::to_string(ds->channels) + "x" +
                      std::to_string(ds->height) + "x" + std::to_string(ds->width) +
                      ", the model expects " + std::to_string(model.channels) + "x" +
                      std::to_string(model.image_size) + "x" + std::to_string(model.image_size));
    for (std::size_t y : ds->labels)
      if (y >= model.num_classes)
        throw DataError(ds->split + " label " + std::to_string(y) + " exceeds model.num_classes");
  }
  return out;
}

fs::path output_root() {
  if (const char* env = std::getenv("AGAT_OUTPUT_ROOT"); env && *env) return env;
  return fs::current_path();
}

RunResult run_training(const RunConfig& cfg, const Datasets& data, const fs::path& out_dir,
                       std::ostream* log) {
  const bool write = !out_dir.empty();
  std::ofstream metrics, plot;
  if (write) {
    fs::create_directories(out_dir);
    write_text(out_dir / "resolved.cfg", cfg.to_key_values().to_text());
    write_text(out_dir / "manifest.json", manifest(cfg, data).dump(2) + "\n");
    metrics.open(out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    plot.open(out_dir / "plot.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics || !plot) throw Error("io", "cannot write metrics in " + out_dir.string());
    metrics << kMetricsHeader << "\n" << std::flush;
  }

  const TrainConfig& tc = cfg.train;
  const Dataset eval_set = data.test.head(tc.eval_samples);
  const std::string series = tc.policy.describe() + " seed=" + std::to_string(tc.seed);

  RunResult result;
  result.state = TrainState::fresh(cfg.model, tc.seed);
  for (std::size_t e = 0; e < tc.epochs; ++e) {
    MetricsRow row = train_epoch(result.state, cfg.model, data.train, tc);
    const bool eval_now = (e + 1) % tc.eval_every == 0 || e + 1 == tc.epochs;
    if (eval_now) {
      const EvalResult ev = evaluate(cfg.model, result.state.params, eval_set, tc.eval_attack,
                                     cfg.eval_batch, tc.seed * 1000003 + e);
      row.clean_acc = ev.clean_acc;
      row.robust_acc = ev.robust_acc;
      result.last_eval = ev;
      if (write) {
        checkpoint_save(out_dir / ("epoch-" + std::to_string(e + 1) + ".ckpt"), cfg.model, tc, result.state);
        nlohmann::ordered_json p{{"series", series}, {"x", e + 1}, {"y", ev.robust_acc}};
        plot << p.dump() << "\n" << std::flush;
      }
    }
    if (write) metrics << to_csv(row) << "\n" << std::flush;
    if (log) *log << "epoch " << row.epoch << "/" << tc.epochs << " " << to_csv(row) << std::endl;
    result.metrics.push_back(row);
  }

  for (std::size_t steps : cfg.final_pgd_steps) {
    AttackConfig atk = AttackConfig::pgd(tc.eval_attack.epsilon, steps);
    atk.pixel_min = tc.eval_attack.pixel_min;
    atk.pixel_max = tc.eval_attack.pixel_max;
    const EvalResult ev = evaluate(cfg.model, result.state.params, data.test, atk, cfg.eval_batch,
                                   tc.seed * 1000003 + 999999 + steps);
    result.final_evals.push_back({steps, ev});
    if (log)
      *log << "final pgd-" << steps << " clean_acc=" << format_double(ev.clean_acc)
           << " robust_acc=" << format_double(ev.robust_acc) << std::endl;
  }
  if (write) {
    checkpoint_save(out_dir / "final.ckpt", cfg.model, tc, result.state);
    nlohmann::ordered_json fin = nlohmann::ordered_json::object();
    for (const auto& f : result.final_evals)
      fin["pgd-" + std::to_string(f.steps)] = {{"clean_acc", f.result.clean_acc},
                                               {"robust_acc", f.result.robust_acc},
                                               {"examples", f.result.count}};
    write_text(out_dir / "final_eval.json", fin.dump(2) + "\n");
  }
  return result;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const Datasets& data,
                                const std::vector<double>& reductions,
                                const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                std::ostream* log) {
  if (reductions.empty()) throw ConfigError("sweep needs at least one reduction level");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  for (double r : reductions)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("sweep reduction levels must lie in [0, 1)");

  std::map<std::string, EvalResult> cache;
  std::vector<SweepRow> rows;
  for (const auto kind : {DropPolicy::Kind::random_input, DropPolicy::Kind::attention_guided}) {
    for (double r : reductions) {
      const CalibratedPolicy cal = r > 0.0 ? calibrate_policy(base.model, kind, r)
                                           : CalibratedPolicy{DropPolicy::none(), 0.0};
      SweepRow row;
      row.policy = kind == DropPolicy::Kind::random_input ? "random" : "agat";
      row.reduction = r;
      row.achieved = cal.savings;
      row.setting = cal.policy.describe();
      for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.reduction.reset();
        cfg.train.policy = cal.policy;
        cfg.train.seed = seed;
        std::ostringstream name;
        name << policy_tag(cal.policy) << "-r" << std::lround(r * 100) << "-s" << seed;
        cfg.output_dir = name.str();
        KeyValues key = cfg.to_key_values();
        key.erase("output.dir");
        const std::string id = key.to_text();
        if (!cache.count(id)) {
          if (log) *log << "sweep run " << row.policy << " reduction=" << r << " " << row.setting << " seed=" << seed << std::endl;
          const fs::path dir = out_dir.empty() ? fs::path{} : out_dir / cfg.output_dir;
          cache[id] = *run_training(cfg, data, dir, log).last_eval;
        }
        row.clean_acc += cache[id].clean_acc / static_cast<double>(seeds.size());
        row.robust_acc += cache[id].robust_acc / static_cast<double>(seeds.size());
      }
      rows.push_back(row);
    }
  }
  if (!out_dir.empty()) {
    std::ostringstream csv;
    csv << "policy,reduction,achieved_savings,setting,clean_acc,robust_acc\n";
    for (const auto& r : rows)
      csv << r.policy << "," << format_double(r.reduction) << "," << format_double(r.achieved) << ","
          << r.setting << "," << format_double(r.clean_acc) << "," << format_double(r.robust_acc) << "\n";
    write_text(out_dir / "sweep.csv", csv.str());
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "policy" << std::right << std::setw(11) << "reduction"
     << std::setw(10) << "achieved" << std::setw(11) << "clean_acc" << std::setw(12) << "robust_acc"
     << "  setting\n";
  os << std::fixed;
  for (const auto& r : rows)
    os << std::left << std::setw(8) << r.policy << std::right << std::setprecision(2)
       << std::setw(10) << r.reduction * 100 << "%" << std::setw(9) << r.achieved * 100 << "%"
       << std::setprecision(4) << std::setw(11) << r.clean_acc << std::setw(12) << r.robust_acc
       << "  " << r.setting << "\n";
  return os.str();
}

int report_error(const std::exception& e, std::ostream& err) {
  std::string kind = "internal";
  int code = kExitFailure;
  if (const auto* ae = dynamic_cast<const Error*>(&e)) {
    kind = ae->kind();
    if (kind == "config") code = kExitConfig;
    else if (kind == "checkpoint") code = kExitCheckpoint;
    else if (kind == "data") code = kExitData;
  }
  std::string msg = e.what();
  for (char& ch : msg)
    if (ch == '\n') ch = ' ';
  err << "error[" << kind << "]: " << msg << std::endl;
  return code;
}

int cmd_train(const std::optional<fs::path>& config, const std::vector<std::string>& overrides, CommandIo io) {
  try {
    const RunConfig cfg = RunConfig::from_key_values(gather_config(config, overrides));
    const Datasets data = load_datasets(cfg.data, cfg.model);
    const fs::path dir = output_root() / cfg.output_dir;
    io.out << "run " << dir.string() << " policy " << cfg.train.policy.describe() << " train "
           << data.train.size() << " test " << data.test.size() << std::endl;
    run_training(cfg, data, dir, &io.out);
    io.out << "metrics " << (dir / "metrics.csv").string() << std::endl;
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(e, io.err);
  }
}

int cmd_eval(const fs::path& checkpoint, const EvalSpec& spec, CommandIo io) {
  try {
    if (spec.attack != "pgd" && spec.attack != "fgsm" && spec.attack != "none")
      throw ConfigError("--attack: expected pgd, fgsm or none, got '" + spec.attack + "'");
    if (!(spec.epsilon >= 0.0)) throw ConfigError("--eps must be non-negative");
    if (spec.attack == "pgd" && spec.steps < 1) throw ConfigError("--steps must be at least 1");

    std::optional<fs::path> cfg_path = spec.config;
    if (!cfg_path) {
      const auto sibling = checkpoint.parent_path() / "resolved.cfg";
      if (!fs::is_regular_file(sibling))
        throw ConfigError("no --config given and no resolved.cfg next to " + checkpoint.string());
      cfg_path = sibling;
    }
    const RunConfig run = RunConfig::from_key_values(gather_config(cfg_path, spec.overrides));
    const Checkpoint ck = checkpoint_load(checkpoint);
    const Datasets data = load_datasets(run.data, ck.model);

    AttackConfig atk;
    if (spec.attack == "pgd") {
      atk = AttackConfig::pgd(spec.epsilon, spec.steps);
    } else if (spec.attack == "fgsm") {
      atk.epsilon = spec.epsilon;
      atk.alpha = spec.epsilon;
      atk.steps = 1;
      atk.random_init = false;
    } else {
      atk.epsilon = 0.0;
      atk.steps = 0;
    }
    if (spec.alpha) atk.alpha = *spec.alpha;
    atk.validate();

    const EvalResult r = evaluate(ck.model, ck.state.params, data.test, atk, run.eval_batch, spec.seed);
    io.out << "examples " << r.count << "\n";
    io.out << "clean_acc " << format_double(r.clean_acc) << "\n";
    io.out << "robust_acc " << format_double(r.robust_acc) << " attack=" << spec.attack
           << " steps=" << atk.steps << " eps=" << format_double(atk.epsilon) << std::endl;
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(e, io.err);
  }
}

int cmd_flops(const std::optional<fs::path>& config, const std::vector<std::string>& overrides, CommandIo io) {
  try {
    const RunConfig cfg = RunConfig::from_key_values(gather_config(config, overrides), false);
    const FlopsReport report = model_flops(cfg.model, cfg.train.policy);
    io.out << to_text(report, cfg.model, cfg.train.policy) << std::flush;
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(e, io.err);
  }
}

int cmd_gradcheck(const GradcheckSpec& spec, CommandIo io) {
  try {
    const KeyValues kv = gather_config(spec.config, spec.overrides);
    ConfigReader in(kv);
    GradcheckOptions opt;
    opt.seeds = in.get_size("gradcheck.seeds", opt.seeds);
    opt.first_seed = in.get_u64("gradcheck.first_seed", opt.first_seed);
    opt.threshold = in.get_double("gradcheck.threshold", opt.threshold);
    opt.step = in.get_double("gradcheck.step", opt.step);
    opt.samples = in.get_size("gradcheck.samples", opt.samples);
    in.reject_unknown();
    if (spec.seeds) opt.seeds = *spec.seeds;
    opt.corrupt = spec.corrupt;
    const GradcheckReport report = run_gradcheck(opt);
    io.out << report.to_text() << std::flush;
    return report.passed() ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    return report_error(e, io.err);
  }
}

int cmd_sweep(const std::optional<fs::path>& config, const std::vector<std::string>& overrides,
              const std::vector<double>& values, const std::vector<std::uint64_t>& seeds, CommandIo io) {
  try {
    if (values.empty()) throw ConfigError("sweep: --values must list at least one reduction level");
    const RunConfig cfg = RunConfig::from_key_values(gather_config(config, overrides));
    const Datasets data = load_datasets(cfg.data, cfg.model);
    const std::vector<std::uint64_t> use_seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : seeds;
    const fs::path dir = output_root() / cfg.output_dir;
    const auto rows = run_sweep(cfg, data, values, use_seeds, dir, &io.err);
    io.out << sweep_table(rows) << std::flush;
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(e, io.err);
  }
}

}  // namespace agat
