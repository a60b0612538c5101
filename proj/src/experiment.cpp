#include "ntiqa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ntiqa/csv.hpp"
#include "ntiqa/serialize.hpp"

namespace fs = std::filesystem;

namespace ntiqa {

namespace {

struct ManifestWriter {
  std::string dir;
  std::string config_hash;
  std::vector<std::string> files;

  void record(const std::string& relpath) { files.push_back(relpath); }

  void finish() const {
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    std::ofstream out(fs::path(dir) / "run_manifest.txt", std::ios::trunc);
    if (!out) throw Error("cannot write run manifest in " + dir);
    out << "tool_version " << kToolVersion << '\n';
    out << "config_hash " << config_hash << '\n';
    out << "created_unix " << secs << '\n';
    for (const std::string& f : files) out << "file " << f << '\n';
  }
};

void ensure_dir(const std::string& dir) {
  fs::create_directories(dir);
}

Dataset load_data_or_fail(const std::string& data_dir) {
  if (!fs::exists(fs::path(data_dir) / "manifest.csv")) {
    throw Error("dataset not found: missing " +
                (fs::path(data_dir) / "manifest.csv").string());
  }
  return load_dataset(data_dir);
}

std::vector<double> parse_grid(const std::string& text, const std::string& key) {
  std::vector<double> grid;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) grid.push_back(parse_double(item, key));
  }
  if (grid.empty()) throw Error(key + ": empty grid");
  return grid;
}

uint64_t seed_from(const Config& cfg, const std::string& key) {
  return static_cast<uint64_t>(cfg.get_int(key, cfg.get_int("seed", 1)));
}

struct AttackRow {
  int64_t sample_id;
  std::string attack;
  double eps, alpha;
  int iters;
  std::string loss_variant;
  double score_before, score_after, linf, ssim;
};

void write_attack_rows(CsvWriter& csv, const std::vector<AttackRow>& rows) {
  for (const AttackRow& r : rows) {
    csv.row({std::to_string(r.sample_id), r.attack, fmt_double(r.eps),
             fmt_double(r.alpha), std::to_string(r.iters), r.loss_variant,
             fmt_double(r.score_before), fmt_double(r.score_after),
             fmt_double(r.linf), fmt_double(r.ssim)});
  }
}

constexpr const char* kAttackCsvHeader =
    "sample_id,attack,eps,alpha,iters,loss_variant,score_before,score_after,"
    "linf,ssim";

std::vector<AttackRow> run_attack(const ScorerModel& model,
                                  const Dataset& data,
                                  const AttackConfig& acfg,
                                  const ScorerModel* surrogate) {
  std::vector<AttackRow> rows;
  std::vector<size_t> test_idx = data.indices(Split::kTest);

  Tensor uap;
  if (acfg.kind == AttackKind::kUap) {
    if (surrogate == nullptr) {
      throw Error("attack: uap needs a surrogate checkpoint "
                  "(--surrogate) to train the perturbation against");
    }
    std::vector<Tensor> train_images;
    for (size_t idx : data.indices(Split::kTrain)) {
      train_images.push_back(data.samples[idx].image);
    }
    uap = uap_train(*surrogate, train_images, acfg);
  }

  for (size_t idx : test_idx) {
    const Sample& s = data.samples[idx];
    AttackResult res;
    switch (acfg.kind) {
      case AttackKind::kFgsm:
        res = fgsm(model, s.image, model.predict(s.image), acfg);
        break;
      case AttackKind::kIfgsm:
        res = ifgsm(model, s.image, model.predict(s.image), acfg);
        break;
      case AttackKind::kUap:
        res = uap_apply(model, s.image, uap);
        break;
      case AttackKind::kPerceptual:
        res = perceptual_attack(model, s.image, acfg);
        break;
    }
    AttackRow row;
    row.sample_id = s.id;
    row.attack = attack_kind_name(acfg.kind);
    row.eps = acfg.kind == AttackKind::kUap ? acfg.uap_scale
              : acfg.kind == AttackKind::kPerceptual ? 0.0
                                                     : acfg.eps;
    row.alpha = acfg.step_size();
    row.iters = acfg.kind == AttackKind::kFgsm ? 1 : acfg.iters;
    row.loss_variant = acfg.kind == AttackKind::kPerceptual
                           ? "NONE"
                           : loss_variant_name(acfg.loss);
    row.score_before = res.score_before;
    row.score_after = res.score_after;
    row.linf = res.linf;
    row.ssim = res.ssim;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PairMetrics {
  double rmse_v, srocc_v, plcc_v, krocc_v, r_v;
};

PairMetrics pair_metrics(const std::vector<double>& reference,
                         const std::vector<double>& predicted, double beta1,
                         double beta2) {
  ScorePairs pairs{reference, predicted};
  PairMetrics m;
  m.rmse_v = rmse(pairs);
  m.srocc_v = srocc(pairs);
  m.plcc_v = plcc(pairs);
  m.krocc_v = krocc(pairs);
  m.r_v = r_robustness(reference, predicted, beta1, beta2);
  return m;
}

}  // namespace

std::string variant_name(TrainVariant variant) {
  return variant == TrainVariant::kBaseline ? "baseline" : "nt";
}

TrainVariant parse_variant(const std::string& name) {
  if (name == "baseline" || name == "BASELINE") return TrainVariant::kBaseline;
  if (name == "nt" || name == "NT") return TrainVariant::kNt;
  throw Error("unknown training variant '" + name + "' (expected baseline|nt)");
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "lambda" || name == "LAMBDA") return SweepAxis::kLambda;
  if (name == "h" || name == "H") return SweepAxis::kH;
  if (name == "intensity" || name == "INTENSITY") return SweepAxis::kIntensity;
  throw Error("unknown sweep axis '" + name + "' (expected lambda|h|intensity)");
}

ArchSpec arch_from_config(const Config& cfg) {
  std::string name = cfg.get("model.arch", "CNN-SCORER");
  ArchKind kind = parse_arch_kind(name);
  switch (kind) {
    case ArchKind::kMlpScorer:
      return ArchSpec::mlp({3, 32, 32}, static_cast<int>(cfg.get_int("model.hidden", 32)));
    case ArchKind::kCnnScorer:
      return ArchSpec::cnn({3, 32, 32});
    case ArchKind::kLinearProbe:
      throw Error("model.arch: linear probes cannot be trained");
  }
  throw Error("model.arch: unknown architecture");
}

TrainConfig train_config_from(const Config& cfg, TrainVariant variant) {
  TrainConfig t;
  t.lambda = variant == TrainVariant::kNt ? cfg.get_double("train.lambda", 0.003) : 0.0;
  t.h = cfg.get_double("train.h", 0.01);
  t.lr = cfg.get_double("train.lr", 0.5);
  t.epochs = static_cast<int>(cfg.get_int("train.epochs", 40));
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 10));
  t.seed = seed_from(cfg, "train.seed");
  t.probe_count = static_cast<int>(cfg.get_int("train.probe_count", 16));
  return t;
}

AttackConfig attack_config_from(const Config& cfg, AttackKind kind) {
  AttackConfig a;
  a.kind = kind;
  a.seed = seed_from(cfg, "attack.seed");
  switch (kind) {
    case AttackKind::kFgsm:
      a.eps = cfg.get_double("attack.fgsm.eps", 0.005);
      a.loss = parse_loss_variant(cfg.get("attack.fgsm.loss", "MID"));
      a.iters = 1;
      break;
    case AttackKind::kIfgsm:
      a.eps = cfg.get_double("attack.ifgsm.eps", 0.005);
      a.alpha = cfg.get_double("attack.ifgsm.alpha", 0.0);
      a.iters = static_cast<int>(cfg.get_int("attack.ifgsm.iters", 10));
      a.loss = parse_loss_variant(cfg.get("attack.ifgsm.loss", "MID"));
      break;
    case AttackKind::kUap:
      a.uap_scale = cfg.get_double("attack.uap.scale", 0.04);
      a.alpha = cfg.get_double("attack.uap.alpha", 0.0);
      a.iters = static_cast<int>(cfg.get_int("attack.uap.iters", 12));
      a.loss = LossVariant::kMid;
      break;
    case AttackKind::kPerceptual:
      a.ssim_weight = cfg.get_double("attack.perceptual.ssim_weight", 1e6);
      a.alpha = cfg.get_double("attack.perceptual.alpha", 0.001);
      a.iters = static_cast<int>(cfg.get_int("attack.perceptual.iters", 50));
      break;
  }
  a.validate();
  return a;
}

CleanEval evaluate_clean(const ScorerModel& model, const Dataset& dataset) {
  std::vector<double> mos, pred;
  for (size_t idx : dataset.indices(Split::kTest)) {
    const Sample& s = dataset.samples[idx];
    mos.push_back(s.mos);
    pred.push_back(model.predict(s.image));
  }
  ScorePairs pairs{mos, pred};
  return CleanEval{srocc(pairs), rmse(pairs)};
}

void cmd_gen_data(const Config& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  int64_t n = cfg.get_int("dataset.n", 625);
  uint64_t seed = seed_from(cfg, "dataset.seed");
  double noise = cfg.get_double("dataset.mos_noise_sigma", 0.0);
  Dataset ds = build_dataset(n, seed, noise);
  save_dataset(ds, out_dir);

  ManifestWriter manifest{out_dir, cfg.hash_hex(), {}};
  manifest.record("manifest.csv");
  for (const Sample& s : ds.samples) manifest.record(s.file);
  manifest.finish();
}

void cmd_train(const Config& cfg, const std::string& data_dir,
               TrainVariant variant, std::optional<double> lambda_override,
               const std::string& out_dir) {
  Dataset data = load_data_or_fail(data_dir);
  TrainConfig tcfg = train_config_from(cfg, variant);
  if (lambda_override) {
    if (variant == TrainVariant::kBaseline && *lambda_override != 0.0) {
      throw Error("train: baseline variant requires lambda = 0, got " +
                  fmt_double(*lambda_override));
    }
    tcfg.lambda = *lambda_override;
  }
  if (variant == TrainVariant::kNt && tcfg.lambda <= 0.0) {
    throw Error("train: nt variant requires lambda > 0, got " + fmt_double(tcfg.lambda));
  }

  ScorerModel model = ScorerModel::init(arch_from_config(cfg), tcfg.seed);
  auto [trained, history] = train(model, data, tcfg);

  ensure_dir(out_dir);
  save_checkpoint((fs::path(out_dir) / "model.bin").string(), trained);
  CsvWriter hist((fs::path(out_dir) / "history.csv").string(),
                 "epoch,iqa_loss,reg_mean,test_rmse,probe_l1norm");
  for (size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochStats& s = history.epochs[e];
    hist.row({std::to_string(e), fmt_double(s.iqa_loss), fmt_double(s.reg_mean),
              fmt_double(s.test_rmse), fmt_double(s.probe_l1norm)});
  }
  hist.close();

  ManifestWriter manifest{out_dir, cfg.hash_hex(), {"model.bin", "history.csv"}};
  manifest.finish();
}

void cmd_attack(const Config& cfg, const std::string& data_dir,
                const std::string& checkpoint, const std::string& attack_name,
                const std::string& surrogate_checkpoint,
                const std::string& out_dir) {
  Dataset data = load_data_or_fail(data_dir);
  ScorerModel model = load_checkpoint(checkpoint);
  if (model.input_shape() != data.samples.front().image.shape()) {
    throw Error("attack: checkpoint input " + shape_str(model.input_shape()) +
                " does not match dataset images " +
                shape_str(data.samples.front().image.shape()));
  }
  AttackKind kind = parse_attack_kind(attack_name);
  AttackConfig acfg = attack_config_from(cfg, kind);

  std::optional<ScorerModel> surrogate;
  if (kind == AttackKind::kUap && !surrogate_checkpoint.empty()) {
    surrogate = load_checkpoint(surrogate_checkpoint);
  }
  auto rows = run_attack(model, data, acfg, surrogate ? &*surrogate : nullptr);

  ensure_dir(out_dir);
  CsvWriter csv((fs::path(out_dir) / "results.csv").string(), kAttackCsvHeader);
  write_attack_rows(csv, rows);
  csv.close();

  ManifestWriter manifest{out_dir, cfg.hash_hex(), {"results.csv"}};
  manifest.finish();
}

void cmd_eval(const Config& cfg, const std::string& results_csv,
              const std::string& data_dir, const std::string& checkpoint,
              const std::string& out_dir) {
  Dataset data = load_data_or_fail(data_dir);
  ScorerModel model = load_checkpoint(checkpoint);
  CsvTable results = read_csv(results_csv);
  size_t cid = results.column("sample_id", results_csv);
  size_t cb = results.column("score_before", results_csv);
  size_t ca = results.column("score_after", results_csv);

  std::map<int64_t, const Sample*> by_id;
  for (const Sample& s : data.samples) by_id[s.id] = &s;

  std::vector<int64_t> ids;
  std::vector<double> mos, before, after;
  for (const auto& row : results.rows) {
    int64_t id = parse_int(row[cid], results_csv);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error("eval: sample id " + std::to_string(id) +
                  " from results is not in the dataset manifest");
    }
    ids.push_back(id);
    mos.push_back(it->second->mos);
    before.push_back(parse_double(row[cb], results_csv));
    after.push_back(parse_double(row[ca], results_csv));
  }
  if (ids.empty()) throw Error("eval: results file has no rows");

  double beta1 = cfg.get_double("eval.beta1", 100.0);
  double beta2 = cfg.get_double("eval.beta2", 0.0);

  double norm_sum = 0.0;
  for (int64_t id : ids) norm_sum += l1_grad_norm(model, by_id.at(id)->image);
  double mean_norm = norm_sum / static_cast<double>(ids.size());

  PairMetrics vs_mos = pair_metrics(mos, after, beta1, beta2);
  PairMetrics vs_before = pair_metrics(before, after, beta1, beta2);

  ensure_dir(out_dir);
  CsvWriter report((fs::path(out_dir) / "report.csv").string(),
                   "context,rmse,srocc,plcc,krocc,r,mean_l1norm");
  auto emit = [&](const char* context, const PairMetrics& m) {
    report.row({context, fmt_double(m.rmse_v), fmt_double(m.srocc_v),
                fmt_double(m.plcc_v), fmt_double(m.krocc_v), fmt_double(m.r_v),
                fmt_double(mean_norm)});
  };
  emit("mos_vs_after", vs_mos);
  emit("before_vs_after", vs_before);
  report.close();

  CsvWriter deltas((fs::path(out_dir) / "deltas.csv").string(), "sample_id,abs_delta");
  for (size_t i = 0; i < ids.size(); ++i) {
    deltas.row({std::to_string(ids[i]), fmt_double(std::abs(after[i] - before[i]))});
  }
  deltas.close();

  ManifestWriter manifest{out_dir, cfg.hash_hex(), {"report.csv", "deltas.csv"}};
  manifest.finish();
}

void cmd_verify(const Config& cfg, const std::string& data_dir,
                const std::string& checkpoint, const std::string& out_dir) {
  Dataset data = load_data_or_fail(data_dir);
  ScorerModel model = load_checkpoint(checkpoint);
  double h = cfg.get_double("verify.h", 0.01);
  double eps_small = cfg.get_double("verify.eps_small", 1e-4);
  double eps_large = cfg.get_double("verify.eps_large", 5e-3);

  ensure_dir(out_dir);
  CsvWriter csv((fs::path(out_dir) / "verify.csv").string(),
                "sample_id,l1_exact,l1_estimate,t1_lhs_small,t1_rhs_small,"
                "t1_gap_small,t1_lhs_large,t1_rhs_large,t1_gap_large");
  std::vector<double> norms;
  for (size_t idx : data.indices(Split::kTest)) {
    const Sample& s = data.samples[idx];
    double exact = l1_grad_norm(model, s.image);
    double estimate = norm_reg_estimate(model, s.image, h);
    Theorem1Gap small = theorem1_gap(model, s.image, eps_small);
    Theorem1Gap large = theorem1_gap(model, s.image, eps_large);
    norms.push_back(exact);
    csv.row({std::to_string(s.id), fmt_double(exact), fmt_double(estimate),
             fmt_double(small.lhs), fmt_double(small.rhs), fmt_double(small.gap),
             fmt_double(large.lhs), fmt_double(large.rhs), fmt_double(large.gap)});
  }
  csv.close();

  // Histogram of exact norms for distribution plots.
  constexpr int kBins = 20;
  double max_norm = 0.0;
  for (double v : norms) max_norm = std::max(max_norm, v);
  double width = max_norm > 0.0 ? max_norm / kBins : 1.0;
  std::vector<int64_t> counts(kBins, 0);
  for (double v : norms) {
    int bin = std::min(kBins - 1, static_cast<int>(v / width));
    counts[static_cast<size_t>(bin)]++;
  }
  CsvWriter hist((fs::path(out_dir) / "norm_hist.csv").string(), "bin_lo,bin_hi,count");
  for (int b = 0; b < kBins; ++b) {
    hist.row({fmt_double(b * width), fmt_double((b + 1) * width),
              std::to_string(counts[static_cast<size_t>(b)])});
  }
  hist.close();

  ManifestWriter manifest{out_dir, cfg.hash_hex(), {"verify.csv", "norm_hist.csv"}};
  manifest.finish();
}

void cmd_sweep(const Config& cfg, const std::string& data_dir, SweepAxis axis,
               const std::string& out_dir) {
  Dataset data = load_data_or_fail(data_dir);
  ArchSpec arch = arch_from_config(cfg);
  ensure_dir(out_dir);
  ManifestWriter manifest{out_dir, cfg.hash_hex(), {}};

  constexpr const char* kSweepHeader =
      "axis_value,clean_srocc,clean_rmse,attack_rmse,attack_srocc,mean_ssim";

  auto attack_stats = [&](const ScorerModel& model, const AttackConfig& acfg) {
    auto rows = run_attack(model, data, acfg, nullptr);
    std::vector<double> before, after;
    double ssim_sum = 0.0;
    for (const AttackRow& r : rows) {
      before.push_back(r.score_before);
      after.push_back(r.score_after);
      ssim_sum += r.ssim;
    }
    ScorePairs pairs{before, after};
    struct {
      double rmse_v, srocc_v, mean_ssim;
    } out{rmse(pairs), srocc(pairs), ssim_sum / static_cast<double>(rows.size())};
    return out;
  };

  switch (axis) {
    case SweepAxis::kLambda: {
      auto grid = parse_grid(cfg.get("sweep.lambda_grid", "0,0.0005,0.001,0.003"),
                             "sweep.lambda_grid");
      AttackConfig acfg = attack_config_from(cfg, AttackKind::kFgsm);
      CsvWriter csv((fs::path(out_dir) / "sweep_lambda.csv").string(), kSweepHeader);
      for (double lam : grid) {
        TrainConfig tcfg = train_config_from(cfg, TrainVariant::kNt);
        tcfg.lambda = lam;
        auto [model, history] = train(ScorerModel::init(arch, tcfg.seed), data, tcfg);
        CleanEval clean = evaluate_clean(model, data);
        auto stats = attack_stats(model, acfg);
        csv.row({fmt_double(lam), fmt_double(clean.srocc), fmt_double(clean.rmse),
                 fmt_double(stats.rmse_v), fmt_double(stats.srocc_v),
                 fmt_double(stats.mean_ssim)});
      }
      csv.close();
      manifest.record("sweep_lambda.csv");
      break;
    }
    case SweepAxis::kH: {
      auto grid = parse_grid(cfg.get("sweep.h_grid", "0.001,0.01,0.1,1"), "sweep.h_grid");
      double lam = cfg.get_double("sweep.h_lambda", 0.0005);
      AttackConfig acfg = attack_config_from(cfg, AttackKind::kFgsm);
      CsvWriter csv((fs::path(out_dir) / "sweep_h.csv").string(), kSweepHeader);
      for (double h : grid) {
        TrainConfig tcfg = train_config_from(cfg, TrainVariant::kNt);
        tcfg.lambda = lam;
        tcfg.h = h;
        auto [model, history] = train(ScorerModel::init(arch, tcfg.seed), data, tcfg);
        CleanEval clean = evaluate_clean(model, data);
        auto stats = attack_stats(model, acfg);
        csv.row({fmt_double(h), fmt_double(clean.srocc), fmt_double(clean.rmse),
                 fmt_double(stats.rmse_v), fmt_double(stats.srocc_v),
                 fmt_double(stats.mean_ssim)});
      }
      csv.close();
      manifest.record("sweep_h.csv");
      break;
    }
    case SweepAxis::kIntensity: {
      auto grid = parse_grid(cfg.get("sweep.intensity_eps_grid", "0.003,0.005,0.01"),
                             "sweep.intensity_eps_grid");
      int iters = static_cast<int>(cfg.get_int("sweep.intensity_iters", 10));
      TrainConfig base_cfg = train_config_from(cfg, TrainVariant::kBaseline);
      TrainConfig nt_cfg = train_config_from(cfg, TrainVariant::kNt);
      auto [base_model, base_hist] = train(ScorerModel::init(arch, base_cfg.seed), data, base_cfg);
      auto [nt_model, nt_hist] = train(ScorerModel::init(arch, nt_cfg.seed), data, nt_cfg);

      auto sweep_one = [&](const ScorerModel& model, const std::string& name) {
        CleanEval clean = evaluate_clean(model, data);
        CsvWriter csv((fs::path(out_dir) / name).string(), kSweepHeader);
        for (double eps : grid) {
          AttackConfig acfg = attack_config_from(cfg, AttackKind::kIfgsm);
          acfg.eps = eps;
          acfg.alpha = 0.0;  // derive from eps
          acfg.iters = iters;
          auto stats = attack_stats(model, acfg);
          csv.row({fmt_double(eps), fmt_double(clean.srocc), fmt_double(clean.rmse),
                   fmt_double(stats.rmse_v), fmt_double(stats.srocc_v),
                   fmt_double(stats.mean_ssim)});
        }
        csv.close();
        manifest.record(name);
      };
      sweep_one(base_model, "sweep_intensity_baseline.csv");
      sweep_one(nt_model, "sweep_intensity_nt.csv");
      break;
    }
  }
  manifest.finish();
}

}  // namespace ntiqa
