#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maskseed/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--preset", args.preset, "base preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", args.seed, "root random seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set model.rank=32");
}

maskseed::RunConfig resolve_config(const CommonArgs& args) {
  maskseed::RunConfig cfg = maskseed::RunConfig::preset(args.preset);
  if (!args.config_path.empty()) cfg.apply_file(args.config_path);
  cfg.apply_overrides(args.overrides);
  if (args.seed_set) cfg.seed = args.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-agnostic segmentation proposal tool"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, infer_args;
  int gen_scenes = 100;
  bool gen_ppm = false;
  std::string gen_out = "out/gen";
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, gen_args);
  gen->add_option("--scenes", gen_scenes, "number of scenes");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_flag("--ppm", gen_ppm, "store images as PPM files instead of inline base64");

  std::string train_data, train_out = "out/train", train_resume;
  long train_steps = -1;
  auto* train = app.add_subcommand("train", "train a model on a dataset");
  add_common(train, train_args);
  train->add_option("--data", train_data, "dataset.json path")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--steps", train_steps, "override train.steps");
  train->add_option("--resume", train_resume, "resume from a checkpoint file");

  std::string infer_weights, infer_data, infer_out = "out/infer";
  bool infer_zoom = false;
  auto* infer = app.add_subcommand("infer", "generate ranked proposals for every scene");
  add_common(infer, infer_args);
  infer->add_option("--weights", infer_weights, "weights file")->required();
  infer->add_option("--data", infer_data, "dataset.json path (images)")->required();
  infer->add_option("--out", infer_out, "output directory");
  infer->add_flag("--zoom", infer_zoom, "add the extra smaller pyramid scale");

  std::string eval_props, eval_data, eval_out = "out/eval";
  bool eval_boxes = false;
  auto* eval = app.add_subcommand("eval", "score proposals against ground truth");
  eval->add_option("--proposals", eval_props, "proposals.json path")->required();
  eval->add_option("--data", eval_data, "dataset.json path")->required();
  eval->add_option("--out", eval_out, "output directory");
  eval->add_flag("--boxes", eval_boxes, "evaluate enclosing boxes instead of masks");

  std::string plot_report, plot_out = "out/plot";
  auto* plot = app.add_subcommand("plot", "re-render the SVG plots from a report");
  plot->add_option("--report", plot_report, "report.json path")->required();
  plot->add_option("--out", plot_out, "output directory");

  std::string selftest_fault;
  auto* selftest = app.add_subcommand("selftest", "run the built-in verification battery");
  selftest->add_option("--inject-fault", selftest_fault, "corrupt a named check (test hook)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      maskseed::cmd_gen(resolve_config(gen_args), gen_scenes, gen_out, !gen_ppm);
    } else if (*train) {
      maskseed::RunConfig cfg = resolve_config(train_args);
      if (train_steps >= 0) cfg.train.steps = train_steps;
      maskseed::cmd_train(cfg, train_data, train_out, train_resume);
    } else if (*infer) {
      maskseed::RunConfig cfg = resolve_config(infer_args);
      if (infer_zoom) cfg.pyramid.zoom = true;
      maskseed::cmd_infer(cfg, infer_weights, infer_data, infer_out);
    } else if (*eval) {
      maskseed::EvalReport report = maskseed::cmd_eval(eval_props, eval_data, eval_out, eval_boxes);
      for (const auto& [budget, ar] : report.ar_at) {
        std::cout << "AR@" << budget << " = " << ar << "\n";
      }
      std::cout << "AUC = " << report.auc << "\n";
    } else if (*plot) {
      maskseed::cmd_plot(plot_report, plot_out);
    } else if (*selftest) {
      if (!maskseed::cmd_selftest(selftest_fault)) return 3;
    }
  } catch (const maskseed::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const maskseed::NumericError& e) {
    std::cerr << "numeric check failure: " << e.what() << "\n";
    return 3;
  } catch (const maskseed::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const maskseed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
