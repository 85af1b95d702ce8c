#include "maskseed/commands.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "maskseed/gradcheck.hpp"
#include "maskseed/io.hpp"
#include "maskseed/weights_io.hpp"

namespace maskseed {

namespace fs = std::filesystem;

int thread_budget() {
  const char* env = std::getenv("MASKSEED_THREADS");
  if (env) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  atomic_write_file(out_dir + "/config_used.cfg", cfg.to_text());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

// --------------------------------------------------------------- gen

void cmd_gen(const RunConfig& cfg, int scenes, const std::string& out_dir, bool inline_pixels) {
  cfg.validate();
  if (scenes < 0) throw UsageError("gen: scene count must be >= 0");
  ensure_dir(out_dir);
  std::vector<Scene> all;
  all.reserve(static_cast<std::size_t>(scenes));
  const std::uint64_t gen_key = Rng::mix(cfg.seed, Rng::hash_label("gen"));
  for (int i = 0; i < scenes; ++i) {
    Rng rng(Rng::mix(gen_key, static_cast<std::uint64_t>(i)));
    all.push_back(generate_scene(cfg.synth, rng));
  }
  save_annotations(all, out_dir + "/dataset.json", inline_pixels);
  echo_config(cfg, out_dir);
}

// --------------------------------------------------------------- train

namespace {

std::map<std::string, std::string> train_state_lines(long step, const Rng& sampler_rng,
                                                     const Rng& dropout_rng) {
  return {{"state.step", std::to_string(step)},
          {"state.sampler_rng", std::to_string(sampler_rng.state())},
          {"state.dropout_rng", std::to_string(dropout_rng.state())}};
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& dataset_path,
                      const std::string& out_dir, const std::string& resume_path) {
  cfg.validate();
  std::vector<Scene> scenes = load_annotations(dataset_path);
  if (scenes.empty()) throw DataError("train: dataset has no scenes: " + dataset_path);
  ensure_dir(out_dir);

  ModelParams<float> params;
  Rng sampler_rng = Rng::for_label(cfg.seed, "sampler");
  Rng dropout_rng = Rng::for_label(cfg.seed, "dropout");
  long start_step = 0;
  if (resume_path.empty()) {
    Rng init_rng = Rng::for_label(cfg.seed, "init");
    params = build_model<float>(cfg.model, init_rng);
  } else {
    LoadedWeights lw = load_weights_expect(resume_path, cfg.model);
    LoadedWeights with_m = load_weights(resume_path, true);
    params = std::move(with_m.params);
    auto need = [&](const char* key) {
      auto it = lw.extra.find(key);
      if (it == lw.extra.end()) throw DataError(std::string("checkpoint missing ") + key);
      return it->second;
    };
    start_step = std::stol(need("state.step"));
    sampler_rng.set_state(std::stoull(need("state.sampler_rng")));
    dropout_rng.set_state(std::stoull(need("state.dropout_rng")));
  }

  std::ostringstream log;
  log << "step,branch,loss\n";
  const std::string log_path = out_dir + "/loss_log.csv";
  const std::string weights_path = out_dir + "/weights.dmsk";
  TrainResult result;
  result.weights_path = weights_path;

  for (long step = start_step; step < cfg.train.steps; ++step) {
    const Branch branch = cfg.train.branch_for_step(step);
    auto batch = make_batch(scenes, branch, cfg.train.optimizer.batch_size, cfg.model.patch_size,
                            cfg.sampler, sampler_rng);
    const double loss = train_step(params, cfg.model, batch, branch, cfg.train, dropout_rng);
    if (branch == Branch::Segmentation) result.final_loss_seg = loss;
    else result.final_loss_score = loss;
    log << step << "," << (branch == Branch::Segmentation ? "seg" : "score") << "," << loss << "\n";
    if ((step + 1) % 100 == 0) {
      std::cerr << "step " << (step + 1) << "/" << cfg.train.steps << " "
                << (branch == Branch::Segmentation ? "seg" : "score") << " loss " << loss << "\n";
    }
    if (cfg.train.checkpoint_every > 0 && (step + 1) % cfg.train.checkpoint_every == 0) {
      save_weights(out_dir + "/checkpoint.dmsk", cfg.model, params,
                   train_state_lines(step + 1, sampler_rng, dropout_rng), true);
      atomic_write_file(log_path, log.str());
    }
  }

  save_weights(weights_path, cfg.model, params);
  save_weights(out_dir + "/checkpoint.dmsk", cfg.model, params,
               train_state_lines(cfg.train.steps, sampler_rng, dropout_rng), true);
  atomic_write_file(log_path, log.str());
  echo_config(cfg, out_dir);
  return result;
}

double scoring_accuracy(const ModelParams<float>& params, const ModelConfig& cfg,
                        const std::vector<Scene>& scenes, const SamplerConfig& scfg, int batches,
                        int batch_size, Rng& rng) {
  long correct = 0, total = 0;
  Rng no_dropout(0);
  for (int b = 0; b < batches; ++b) {
    auto batch = make_batch(scenes, Branch::Scoring, batch_size, cfg.patch_size, scfg, rng);
    for (const auto& t : batch) {
      Tensor<float> features = trunk_forward(params, cfg, t.patch);
      const float logit = score_head_forward(params, cfg, features, false, no_dropout);
      const int predicted = logit > 0 ? 1 : -1;
      correct += predicted == t.label;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// --------------------------------------------------------------- infer

void cmd_infer(const RunConfig& cfg, const std::string& weights_path,
               const std::string& dataset_path, const std::string& out_dir) {
  cfg.validate();
  LoadedWeights lw = load_weights_expect(weights_path, cfg.model);
  std::vector<Scene> scenes = load_annotations(dataset_path);
  ensure_dir(out_dir);

  std::vector<std::vector<Proposal>> per_image(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), thread_budget(), [&](int i) {
    per_image[static_cast<std::size_t>(i)] =
        propose(lw.params, cfg.model, scenes[static_cast<std::size_t>(i)].image, cfg.pyramid);
  });
  save_proposals(per_image, out_dir + "/proposals.json");
  echo_config(cfg, out_dir);
}

// --------------------------------------------------------------- eval

EvalReport cmd_eval(const std::string& proposals_path, const std::string& dataset_path,
                    const std::string& out_dir, bool use_boxes) {
  std::vector<Scene> scenes = load_annotations(dataset_path);
  std::vector<std::vector<Proposal>> proposals = load_proposals(proposals_path);
  ensure_dir(out_dir);
  EvalOptions opts;
  opts.use_boxes = use_boxes;
  EvalReport report = evaluate(proposals, scenes, opts);
  write_report_json(report, out_dir + "/report.json");
  write_report_csv(report, out_dir + "/report.csv");
  write_report_svgs(report, out_dir + "/ar_vs_budget.svg", out_dir + "/recall_vs_iou.svg");
  return report;
}

void cmd_plot(const std::string& report_path, const std::string& out_dir) {
  EvalReport report = read_report_json(report_path);
  ensure_dir(out_dir);
  write_report_svgs(report, out_dir + "/ar_vs_budget.svg", out_dir + "/recall_vs_iou.svg");
}

// --------------------------------------------------------------- selftest

namespace {

// naive 6-loop convolution, independent of the production path
Tensor<double> conv2d_reference(const Tensor<double>& in, const Tensor<double>& w,
                                const Tensor<double>& b, int stride, int pad) {
  const int ic = in.dim(0), ih = in.dim(1), iw = in.dim(2);
  const int oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (ih + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;
  Tensor<double> out({oc, oh, ow});
  for (int o = 0; o < oc; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b.data[static_cast<std::size_t>(o)];
        for (int c = 0; c < ic; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int sy = y * stride + ky - pad;
              const int sx = x * stride + kx - pad;
              if (sy < 0 || sy >= ih || sx < 0 || sx >= iw) continue;
              acc += w.at4(o, c, ky, kx) * in.at3(c, sy, sx);
            }
        out.at3(o, y, x) = acc;
      }
  return out;
}

struct CheckReporter {
  bool all_ok = true;
  void report(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    all_ok = all_ok && ok;
  }
};

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.patch_size = 32;
  cfg.trunk = "C4,P,C6,P,C8,P,C8,P";
  cfg.rank = 12;
  cfg.mask_out = 8;
  cfg.score_hidden1 = 10;
  cfg.score_hidden2 = 12;
  cfg.dropout_rate = 0.5;
  return cfg;
}

TrainingTriplet random_triplet(int patch_size, int label, Rng& rng) {
  TrainingTriplet t;
  t.patch = Tensor<float>({3, patch_size, patch_size});
  for (auto& v : t.patch.data) v = static_cast<float>(rng.uniform());
  if (label == 1) {
    t.mask.resize(static_cast<std::size_t>(patch_size) * patch_size);
    for (auto& v : t.mask) v = rng.bernoulli(0.3) ? 1 : -1;
    t.mask[static_cast<std::size_t>(patch_size / 2) * patch_size + patch_size / 2] = 1;
  }
  t.label = label;
  return t;
}

// full model loss with analytic gradients for every parameter
double model_loss_and_grads(ModelParams<double>& params, const ModelConfig& cfg,
                            const TrainingTriplet& triplet, double score_loss_weight,
                            ModelParams<double>* grads) {
  Tensor<double> patch = tensor_cast<double>(triplet.patch);
  TrunkCache<double> tcache;
  Tensor<double> features = trunk_forward(params, cfg, patch, grads ? &tcache : nullptr);
  SegCache<double> seg_cache;
  Tensor<double> logits = seg_head_forward(params, cfg, features, grads ? &seg_cache : nullptr);
  ScoreCache<double> score_cache;
  Rng no_dropout(0);
  ModelConfig eval_cfg = cfg;
  eval_cfg.dropout_rate = 0.0;  // deterministic for finite differences
  const double score_logit = score_head_forward(params, eval_cfg, features, false, no_dropout,
                                                grads ? &score_cache : nullptr);
  std::vector<std::int8_t> target;
  if (triplet.label == 1) {
    target = downsample_mask_target(triplet.mask, cfg.patch_size, cfg.mask_out);
  }
  auto lr = joint_loss(logits, score_logit, target, triplet.label, score_loss_weight);
  if (grads) {
    Tensor<double> grad_feat_seg = seg_head_backward(params, cfg, seg_cache, lr.grad_mask_logits, *grads);
    Tensor<double> grad_feat_score =
        score_head_backward(params, eval_cfg, score_cache, lr.grad_score_logit, *grads);
    for (std::size_t i = 0; i < grad_feat_seg.data.size(); ++i) {
      grad_feat_seg.data[i] += grad_feat_score.data[i];
    }
    trunk_backward(params, cfg, tcache, grad_feat_seg, *grads);
  }
  return lr.loss;
}

}  // namespace

bool cmd_selftest(const std::string& fault_inject) {
  CheckReporter rep;

  // conv2d vs the naive reference
  {
    Rng rng(101);
    nn::LayerParams<double> lp({3, 2, 3, 3}, {3});
    fill_uniform(lp.weights, 0.5, rng);
    fill_uniform(lp.bias, 0.5, rng);
    Tensor<double> in({2, 7, 7});
    fill_uniform(in, 1.0, rng);
    Tensor<double> got = nn::conv2d(in, lp, 1, 1);
    Tensor<double> want = conv2d_reference(in, lp.weights, lp.bias, 1, 1);
    double err = 0;
    for (std::size_t i = 0; i < got.numel(); ++i) {
      err = std::max(err, std::fabs(got.data[i] - want.data[i]));
    }
    if (fault_inject == "conv2d") err += 1.0;
    rep.report("conv2d forward vs naive reference", err < 1e-12, "max err " + std::to_string(err));
  }

  // gradient checks on the primitive layers
  {
    Rng rng(202);
    bool ok = true;
    std::string detail;
    for (int seed = 0; seed < 3 && ok; ++seed) {
      nn::LayerParams<double> lp({3, 2, 3, 3}, {3});
      fill_uniform(lp.weights, 0.5, rng);
      fill_uniform(lp.bias, 0.5, rng);
      Tensor<double> in({2, 6, 6});
      fill_uniform(in, 1.0, rng);
      Tensor<double> proj({3, 6, 6});
      fill_uniform(proj, 1.0, rng);
      auto f = [&]() {
        Tensor<double> out = nn::conv2d(in, lp, 1, 1);
        double acc = 0;
        for (std::size_t i = 0; i < out.numel(); ++i) acc += out.data[i] * proj.data[i];
        return acc;
      };
      auto grads = nn::conv2d_backward(proj, in, lp, 1, 1);
      std::vector<nn::GradCheckTarget> targets = {
          {&lp.weights, &grads.weights}, {&lp.bias, &grads.bias}, {&in, &grads.input}};
      const double err = nn::grad_check(f, targets, 1e-5, rng);
      if (fault_inject == "layer_grads") ok = false;
      if (err >= 1e-4) {
        ok = false;
        detail = "conv2d grad err " + std::to_string(err);
      }
    }
    rep.report("layer gradient checks", ok, detail);
  }

  // full joint loss gradient check, both labels
  {
    const ModelConfig cfg = tiny_config();
    Rng rng(303);
    bool ok = true;
    std::string detail;
    for (int label : {1, -1}) {
      ModelParams<double> params = build_model<double>(cfg, rng);
      TrainingTriplet triplet = random_triplet(cfg.patch_size, label, rng);
      ModelParams<double> grads = zero_grads_like(params);
      model_loss_and_grads(params, cfg, triplet, 1.0 / 32.0, &grads);
      std::vector<nn::GradCheckTarget> targets;
      for_each_param(params, cfg.full_rank,
                     [&](const std::string&, Tensor<double>& t, Tensor<double>&) {
                       targets.push_back({&t, nullptr});
                     });
      std::size_t ti = 0;
      for_each_param(grads, cfg.full_rank,
                     [&](const std::string&, Tensor<double>& g, Tensor<double>&) {
                       targets[ti++].grad = &g;
                     });
      auto f = [&]() { return model_loss_and_grads(params, cfg, triplet, 1.0 / 32.0, nullptr); };
      const double err = nn::grad_check(f, targets, 1e-4, rng, 6);
      if (fault_inject == "joint_loss") ok = false;
      if (err >= 1e-4) {
        ok = false;
        detail = "label " + std::to_string(label) + " err " + std::to_string(err);
      }
    }
    rep.report("joint loss gradient check", ok, detail);
  }

  // dense application vs per-patch crops
  {
    const ModelConfig cfg = tiny_config();
    Rng rng(404);
    ModelParams<float> params = build_model<float>(cfg, rng);
    Tensor<float> level({3, 64, 96});
    for (auto& v : level.data) v = static_cast<float>(rng.uniform());
    DenseOutput<float> dense = dense_apply(params, cfg, level);
    DenseOutput<float> oracle = patchwise_oracle(params, cfg, level);
    double err = 0;
    for (std::size_t i = 0; i < dense.mask_logits.numel(); ++i) {
      err = std::max(err, std::fabs(static_cast<double>(dense.mask_logits.data[i]) -
                                    oracle.mask_logits.data[i]));
    }
    for (std::size_t i = 0; i < dense.score_logits.numel(); ++i) {
      err = std::max(err, std::fabs(static_cast<double>(dense.score_logits.data[i]) -
                                    oracle.score_logits.data[i]));
    }
    if (fault_inject == "dense") err += 1.0;
    rep.report("dense application vs patchwise crops", err < 1e-4, "max abs err " + std::to_string(err));
  }

  // metric sanity against small brute-force recomputations
  {
    Rng rng(505);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
      const int n_props = rng.uniform_int(0, 5);
      const int n_gts = rng.uniform_int(1, 4);
      std::vector<std::vector<double>> m(static_cast<std::size_t>(n_props));
      for (auto& row : m) {
        row.resize(static_cast<std::size_t>(n_gts));
        for (auto& v : row) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
      }
      MatchResult got = match_greedy(m, static_cast<std::size_t>(n_gts));
      // independent greedy: repeated argmax scan
      std::vector<bool> pu(static_cast<std::size_t>(n_props), false);
      std::vector<bool> gu(static_cast<std::size_t>(n_gts), false);
      std::vector<double> want(static_cast<std::size_t>(n_gts), 0.0);
      while (true) {
        double best = 0;
        int bp = -1, bg = -1;
        for (int p = 0; p < n_props; ++p) {
          if (pu[static_cast<std::size_t>(p)]) continue;
          for (int g = 0; g < n_gts; ++g) {
            if (gu[static_cast<std::size_t>(g)]) continue;
            if (m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] > best) {
              best = m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)];
              bp = p;
              bg = g;
            }
          }
        }
        if (bp < 0) break;
        pu[static_cast<std::size_t>(bp)] = true;
        gu[static_cast<std::size_t>(bg)] = true;
        want[static_cast<std::size_t>(bg)] = best;
      }
      for (int g = 0; g < n_gts; ++g) {
        if (got.gt_best_iou[static_cast<std::size_t>(g)] != want[static_cast<std::size_t>(g)]) ok = false;
      }
      const auto ar = average_recall(got.gt_best_iou);
      double want_ar = 0;
      for (double t : ar_iou_thresholds()) {
        long hit = 0;
        for (double v : got.gt_best_iou) hit += v >= t;
        want_ar += static_cast<double>(hit) / n_gts;
      }
      want_ar /= static_cast<double>(ar_iou_thresholds().size());
      if (!ar || *ar != want_ar) ok = false;
    }
    if (fault_inject == "metrics") ok = false;
    rep.report("metric oracles (match/AR)", ok);
  }

  // RLE round trip
  {
    Rng rng(606);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const std::size_t n = 1 + rng.uniform_below(500);
      std::vector<std::uint8_t> bits(n);
      for (auto& b : bits) b = rng.bernoulli(0.4);
      if (rle_decode(rle_encode(bits.data(), n), n) != bits) ok = false;
    }
    if (fault_inject == "rle") ok = false;
    rep.report("mask RLE round trip", ok);
  }

  return rep.all_ok;
}

}  // namespace maskseed
