// Acceptance checks, one line per criterion:  acceptance [criterion...]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/student_t.hpp"
#include "vym/dataset.hpp"
#include "vym/error.hpp"
#include "vym/image.hpp"
#include "vym/metrics.hpp"
#include "vym/model.hpp"
#include "vym/preprocess.hpp"
#include "vym/synth.hpp"
#include "vym/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vym;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream o;
    o << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, o.str());
  }
  Outcome done(const std::string& summary) const {
    std::string d = summary;
    for (const auto& f : failures_) d += "; FAILED " + f;
    return {pass_, d};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> failures_;
};

template <class F>
auto timed(F&& f, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = f();
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vym_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small encoders on 48px inputs: the desk-scale stand-in for the default network.
ModelConfig desk_model() { return ModelConfig::for_input_side(48, {8, 16, 16, 32}, {32, 16}, 32); }

json desk_config_json() {
  return {{"preprocess", {{"target_side", 48}}},
          {"model", {{"encoder_widths", {8, 16, 16, 32}}, {"head_widths", {32, 16}}, {"fc_hidden", 32}}},
          {"train", {{"epochs", 60}, {"patience", 15}, {"batch_size", 8}, {"learning_rate", 1e-3}}}};
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = vym::cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "vym %s failed (%d): %s\n", args.front().c_str(), code, e.str().c_str());
  return code;
}

Outcome gradient_suite() {
  Checks c;
  double worst = 0.0;
  std::size_t cases = 0;
  std::string worst_op;
  double secs = 0.0;
  timed(
      [&] {
        for (const auto& op : testing::differentiable_ops()) {
          Rng rng(derive_seed(2024, hash_name(op)));
          for (int i = 0; i < 50; ++i) {
            auto gc = testing::random_grad_case(op, rng);
            const auto r = testing::grad_check(gc.f, gc.inputs, rng);
            if (r.max_rel_error > worst) {
              worst = r.max_rel_error;
              worst_op = op;
            }
            c.expect(r.max_rel_error <= 1e-3, op + " case " + std::to_string(i) + " rel err " + fmt(r.max_rel_error, 6));
            ++cases;
          }
        }
        return 0;
      },
      secs);
  c.expect(secs < 120.0, "runtime " + fmt(secs, 1) + " s over 120 s");
  return c.done(std::to_string(testing::differentiable_ops().size()) + " ops, " + std::to_string(cases) +
                " cases, worst rel err " + fmt(worst, 8) + " (" + worst_op + ") <= 1e-3, " + fmt(secs, 1) +
                " s < 120 s");
}

std::string chain(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ">" : "") + std::to_string(v[i]);
  return s;
}

Outcome shape_suite() {
  Checks c;
  const ModelConfig cfg;
  const auto enc = cfg.encoder_sizes();
  std::vector<std::size_t> dec{enc.back()};
  for (auto s : cfg.decoder_sizes()) dec.push_back(s);
  c.expect(enc == std::vector<std::size_t>{150, 75, 38, 19, 10}, "encoder chain " + chain(enc));
  // The fifth deconvolution is stride 1, so the chain holds 150 twice.
  c.expect(dec == std::vector<std::size_t>{10, 19, 38, 75, 150, 150}, "decoder chain " + chain(dec));
  const MtlModel model = build_model(cfg, 1);
  const std::array<Tensor, 4> in{Tensor::zeros({3, 150, 150}), Tensor::zeros({3, 150, 150}),
                                 Tensor::zeros({3, 150, 150}), Tensor::zeros({3, 150, 150})};
  const Shape merged = model.merged_features(in).shape();
  c.expect(merged == Shape{512, 10, 10}, "merged " + shape_str(merged));
  const auto out = model.forward(in);
  for (const auto& r : out.reconstructions) c.expect(r.shape() == Shape{3, 150, 150}, "recon " + shape_str(r.shape()));
  bool broken_rejected = false;
  ModelConfig bad = cfg;
  bad.decoder_output_pads = {0, 0, 0, 1};
  try {
    build_model(bad, 1);
  } catch (const ShapeError&) {
    broken_rejected = true;
  }
  c.expect(broken_rejected, "a broken output pad was accepted");
  return c.done("encoder " + chain(enc) + ", decoder " + chain(dec) + ", merged " + shape_str(merged) +
                ", broken plan rejected");
}

Outcome overfit() {
  Checks c;
  const fs::path dir = scratch("overfit");
  double secs = 0.0;
  const SynthConfig sc;
  const Manifest m = load_manifest(generate_dataset(8, sc, dir));
  PreprocessConfig pc;
  pc.target_side = 48;
  const auto ex = prepare_examples(m, read_image(dir / "reference.png"), pc);
  const ModelConfig mc = desk_model();
  MtlModel model = build_model(mc, 7);
  ExampleRefs refs;
  for (const auto& e : ex) refs.push_back(&e);
  TrainConfig tc;
  tc.epochs = 500;
  tc.patience = 499;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  const auto result = timed([&] { return train_one(model, refs, refs, tc, Mode{}); }, secs);
  std::vector<double> p, t;
  double recon = 0.0;
  for (const auto& e : ex) {
    const auto o = model.forward(e.views);
    p.push_back(scaled_to_grams(o.yield_scaled.item(), mc.target_scale_g));
    t.push_back(e.weight_g);
    recon += per_pixel_mse(o.reconstructions, e.views);
  }
  recon /= static_cast<double>(ex.size());
  double mean = 0.0;
  for (double w : t) mean += w;
  mean /= static_cast<double>(t.size());
  const double ratio = mae(p, t) / mean;
  c.expect(result.epochs_trained == 500, "trained " + std::to_string(result.epochs_trained) + " epochs");
  c.expect(ratio <= 0.02, "MAE ratio " + fmt(ratio, 4));
  c.expect(recon <= 0.03, "recon " + fmt(recon, 4));
  c.expect(secs < 900.0, "runtime " + fmt(secs, 1) + " s");
  fs::remove_all(dir);
  return c.done("8 examples x 500 epochs at 48px: train MAE " + fmt(mae(p, t), 2) + " g = " + fmt(100 * ratio, 2) +
                "% of " + fmt(mean, 1) + " g (<= 2%), recon MSE/pixel " + fmt(recon, 4) + " (<= 0.03), " +
                fmt(secs, 1) + " s < 900 s");
}

Outcome preprocessing_oracles() {
  Checks c;
  Rng rng(6);
  int eq = 0, mt = 0, pd = 0;
  for (int i = 0; i < 100; ++i) {
    const RgbImage img = testing::random_image(16, 16, rng);
    const bool ok = equalize_histogram(img) == testing::equalize_oracle(img);
    eq += ok;
    c.expect(ok, "equalize image " + std::to_string(i));
  }
  for (int i = 0; i < 100; ++i) {
    const RgbImage img = testing::random_image(16, 16, rng);
    const RgbImage ref = testing::random_image(16, 16, rng);
    const bool ok = match_histogram(img, ref) == testing::match_oracle(img, ref);
    mt += ok;
    c.expect(ok, "match pair " + std::to_string(i));
  }
  for (int i = 0; i < 100; ++i) {
    const std::size_t w = rng.integer(1, 30), h = rng.integer(1, 30);
    const std::size_t cw = w + rng.integer(0, 9), ch = h + rng.integer(0, 9);
    const RgbImage img = testing::random_image(w, h, rng);
    const RgbImage out = pad_to_uniform(img, cw, ch, Rgb{255, 255, 255});
    const std::size_t left = (cw - w) / 2, top = (ch - h) / 2;
    bool ok = out.width() == cw && out.height() == ch;
    for (std::size_t y = 0; ok && y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) ok = ok && out.at(x + left, y + top) == img.at(x, y);
    }
    pd += ok;
    c.expect(ok, "pad case " + std::to_string(i));
  }
  return c.done("equalize exact " + std::to_string(eq) + "/100, match exact " + std::to_string(mt) +
                "/100, pad interior exact " + std::to_string(pd) + "/100");
}

Outcome metrics_exactness() {
  Checks c;
  using V = std::vector<double>;
  c.near(mae(V{1000, 1400}, V{1100, 1300}), 100.0, 1e-12, "mae example");
  c.near(mae(V{5, 6, 7}, V{5, 6, 7}), 0.0, 0.0, "mae identical");
  c.near(mae(V{0}, V{231.51}), 231.51, 1e-12, "mae single pair");
  c.near(mean_accuracy(300, 1200), 0.75, 1e-12, "accuracy example");
  c.near(mean_accuracy(0, 1200), 1.0, 0.0, "accuracy zero mae");
  const std::vector<Tensor> zeros{Tensor::zeros({3, 4, 4})}, ones{Tensor::full({3, 4, 4}, 1.0)};
  c.near(per_pixel_mse(ones, ones), 0.0, 0.0, "per-pixel identical");
  c.near(per_pixel_mse(zeros, ones), 1.0, 1e-12, "per-pixel extremes");
  Rng rng(2);
  std::vector<Tensor> a, b;
  double acc = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 4; ++i) {
    a.push_back(testing::random_tensor({3, 5, 7}, rng, 0.0, 1.0));
    b.push_back(testing::random_tensor({3, 5, 7}, rng, 0.0, 1.0));
    for (std::size_t j = 0; j < a.back().numel(); ++j) {
      const double d = a.back().data()[j] - b.back().data()[j];
      acc += d * d;
      ++n;
    }
  }
  c.near(per_pixel_mse(a, b), acc / static_cast<double>(n), 1e-12, "per-pixel brute force");
  c.near(ci95(V(6, 42.0)), 0.0, 0.0, "ci95 equal values");
  c.near(ci95(V{1, 2, 3, 4, 5, 6}), 1.963, 1e-3, "ci95 1..6");
  c.near(ci95(V{0, 2}), 12.706, 1e-3, "ci95 {0,2}");
  const V fa{100, 120, 130, 90, 110, 105};
  V fb = fa;
  for (auto& x : fb) x += 100.0;
  c.near(paired_fold_comparison(fa, fa), 0.5, 1e-12, "paired identical");
  c.expect(paired_fold_comparison(fa, fb) >= 0.9999, "paired uniform offset");
  const V ha{1, 2, 3, 4, 5, 6}, hb{2, 2.5, 4.5, 4, 7, 6.5};
  double mean = 0.0, ss = 0.0;
  const V d{1, 0.5, 1.5, 0, 2, 0.5};
  for (double x : d) mean += x / 6.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double t = mean / (std::sqrt(ss / 5.0) / std::sqrt(6.0));
  c.near(paired_fold_comparison(ha, hb), testing::t_cdf_by_integration(t, 5), 1e-3, "paired hand t");
  const double implied = 166.35 / (1.0 - 0.8515);
  c.near(implied, 1120.2, 0.1, "inverted accuracy");
  c.near(mean_accuracy(166.35, implied), 0.8515, 1e-12, "accuracy at implied mean");
  return c.done("mae, mean_accuracy, per_pixel_mse, ci95 (1.963, 12.706), paired (0.5, >=0.9999, t=" + fmt(t, 4) +
                ") reproduced; 166.35 g at 85.15% implies mean " + fmt(implied, 2) + " g (1120.2 +- 0.1)");
}

Outcome synthetic_experiment() {
  Checks c;
  const fs::path dir = scratch("experiment");
  const fs::path config = dir / "desk.json";
  std::ofstream(config) << desk_config_json().dump(2);
  double secs = 0.0;
  std::string summary;
  int mtl_wins = 0;
  timed(
      [&] {
        const std::string data = (dir / "data").string();
        if (cli({"synth", "--n", "160", "--seed", "1", "--out", data}) != 0) {
          c.expect(false, "synth");
          return 0;
        }
        for (const std::string seed : {"1", "2", "3"}) {
          const std::string out = (dir / ("seed" + seed)).string();
          std::map<std::string, double> agg;
          for (const std::string mode : {"single-view:E1", "mtl"}) {
            if (cli({"cv", "--config", config.string(), "--manifest", data + "/manifest.csv", "--mode", mode, "--k",
                     "6", "--seed", seed, "--out", out}) != 0) {
              c.expect(false, "cv " + mode + " seed " + seed);
              return 0;
            }
            agg[mode] = json::parse(slurp(fs::path(out) / "report.json")).at("aggregate").at("mae_g").get<double>();
          }
          const json mtl = json::parse(slurp(fs::path(out) / "report-mtl.json"));
          const double conf = mtl.at("comparisons").at(0).at("confidence_this_better").get<double>();
          const bool win = agg["mtl"] < agg["single-view:E1"];
          mtl_wins += win;
          summary += " seed " + seed + ": mtl " + fmt(agg["mtl"], 1) + " vs E1 " + fmt(agg["single-view:E1"], 1) +
                     " g (paired confidence " + fmt(conf, 3) + ");";
        }
        return 0;
      },
      secs);
  c.expect(mtl_wins >= 2, "MTL lower in " + std::to_string(mtl_wins) + " of 3 seeds");
  c.expect(secs < 3600.0, "runtime " + fmt(secs, 1) + " s");
  fs::remove_all(dir);
  return c.done("160 examples, 6 folds, desk model at 48px;" + summary + " MTL lower in " +
                std::to_string(mtl_wins) + "/3 (need 2), " + fmt(secs, 1) + " s < 3600 s");
}

Outcome reproducibility() {
  Checks c;
  const fs::path dir = scratch("repro");
  const fs::path config = dir / "desk.json";
  json small = desk_config_json();
  small["train"]["epochs"] = 8;
  small["train"]["patience"] = 4;
  std::ofstream(config) << small.dump(2);
  const std::string exe = VYM_CLI_PATH;
  auto sh = [&](const std::string& args) {
    const std::string cmd = "\"" + exe + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string data = (dir / "data").string(), out = (dir / "out").string();
  c.expect(sh("synth --n 24 --seed 5 --out \"" + data + "\"") == 0, "synth");
  const std::string cv = "cv --config \"" + config.string() + "\" --manifest \"" + data +
                         "/manifest.csv\" --seed 5 --out \"" + out + "\"";
  c.expect(sh(cv) == 0, "first cv");
  const std::string first = slurp(fs::path(out) / "report.json");
  c.expect(sh(cv) == 0, "second cv");
  const std::string second = slurp(fs::path(out) / "report.json");
  c.expect(!first.empty(), "empty report");
  c.expect(first == second, "report.json bytes differ");
  fs::remove_all(dir);
  return c.done("two `vym cv` runs, same config and seed: report.json " + std::to_string(first.size()) + " bytes, " +
                (first == second && !first.empty() ? "byte-identical" : "different"));
}

Outcome naming_and_folds() {
  Checks c;
  std::set<std::string> ids;
  for (int plant = 1; plant <= 80; ++plant) {
    for (Cordon cordon : {Cordon::kNorth, Cordon::kSouth}) {
      for (View v : kViewOrder) {
        const ImageId id{plant, cordon, v};
        const std::string text = id.format();
        c.expect(parse_image_id(text) == id && parse_image_id(text).format() == text, "id " + text);
        ids.insert(text);
      }
    }
  }
  c.expect(ids.size() == 640, "distinct ids " + std::to_string(ids.size()));
  const auto ex = testing::plant_examples(80);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::string v = testing::fold_invariant_violation(make_folds(ex, 6, seed), ex);
    ok += v.empty();
    c.expect(v.empty(), "seed " + std::to_string(seed) + ": " + v);
  }
  return c.done(std::to_string(ids.size()) + " ids round-trip; fold invariants hold on " + std::to_string(ok) +
                "/1000 seeds");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"shape suite", shape_suite},
      {"overfit check", overfit},
      {"preprocessing oracles", preprocessing_oracles},
      {"metrics exactness", metrics_exactness},
      {"synthetic MTL vs single-view", synthetic_experiment},
      {"reproducibility", reproducibility},
      {"naming and fold invariants", naming_and_folds}};
  std::vector<std::size_t> pick;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu ...]\n", argv[0], criteria.size());
      return 2;
    }
    pick.push_back(static_cast<std::size_t>(n - 1));
  }
  if (pick.empty()) {
    for (std::size_t i = 0; i < criteria.size(); ++i) pick.push_back(i);
  }
  bool all = true;
  for (auto i : pick) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
