#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace trj;
  CLI::App app{"trj: temporal Jacobian-field motion synthesis for unrigged meshes"};
  app.set_config("--config", "", "INI/TOML file with option defaults; command-line flags take precedence");
  app.require_subcommand(1);

  cli::SynthOptions synth;
  std::vector<std::string> styles;
  auto* s = app.add_subcommand("synth", "Generate a synthetic skinned-body dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--sequences", synth.sequences, "Number of sequences (one body shape each)");
  s->add_option("--frames", synth.frames, "Frames per sequence");
  s->add_option("--fps", synth.frame_rate, "Frame rate");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--styles", styles, "Motion styles to cycle through (walk, wave, rest)");
  s->add_flag("--root-motion", synth.root_motion, "Add a root sway and forward drift as global transforms");

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--dataset", train.dataset, "Dataset directory or index file")->required();
  t->add_option("--checkpoint", train.checkpoint, "Checkpoint to write (and to resume from)")->required();
  t->add_option("--baseline", train.baseline, "Model variant: trj, njf_mt or vertex_ode");
  t->add_option("--seed", train.seed, "Random seed");
  t->add_option("--epochs", train.epochs, "Maximum number of epochs in total");
  t->add_option("--window", train.window, "Window length in frames");
  t->add_option("--alpha", train.alpha, "Weight of the Jacobian loss");
  t->add_option("--lr", train.lr, "Adam learning rate");
  t->add_option("--convergence", train.convergence, "Stop once the epoch vertex loss falls below this");
  t->add_option("--log", train.log, "Per-epoch loss log (default: <checkpoint>.log)");
  t->add_option("--wks-cache", train.wks_cache, "Directory caching shape descriptors");
  t->add_flag("--resume", train.resume, "Continue from --checkpoint if it exists");
  t->add_flag("--freeze-residual", train.freeze_residual, "Train the posing path only");
  t->add_flag("--quiet", train.quiet, "Do not echo the loss log");

  cli::InferOptions infer;
  std::string beta_text;
  bool no_global = false;
  auto* i = app.add_subcommand("infer", "Animate a mesh with a trained model");
  i->add_option("--checkpoint", infer.checkpoint, "Trained checkpoint")->required();
  i->add_option("--target", infer.target, "First-frame mesh (OBJ)")->required();
  i->add_option("--motion", infer.motion, "Motion manifest")->required();
  i->add_option("--out", infer.out, "Output directory for frame_XXXX.obj")->required();
  i->add_option("--beta", beta_text, "Comma-separated shape signature overriding the manifest");
  i->add_option("--wks-cache", infer.wks_cache, "Directory caching shape descriptors");
  i->add_flag("--no-global", no_global, "Do not apply the manifest's global transforms");

  cli::EvalOptions eval;
  bool align = false;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--checkpoint", eval.checkpoint, "Evaluate this model on --dataset");
  e->add_option("--dataset", eval.dataset, "Dataset directory or index file");
  e->add_option("--motion", eval.motion, "Ground-truth motion manifest for --predictions");
  e->add_option("--predictions", eval.predictions, "Directories of predicted frame_XXXX.obj files");
  e->add_option("--out", eval.out, "Metrics JSON file");
  e->add_option("--wks-cache", eval.wks_cache, "Directory caching shape descriptors");
  e->add_flag("--align", align, "Remove each frame's translation relative to the first-frame anchor before scoring");

  CLI11_PARSE(app, argc, argv);

  try {
    configure_threads_from_env();
    if (s->parsed()) {
      for (const auto& name : styles) synth.styles.push_back(io::parse_motion_style(name));
      cli::cmd_synth(synth);
      return cli::kExitOk;
    }
    if (t->parsed()) {
      const auto summary = cli::cmd_train(train);
      std::cout << (summary.exit_code == cli::kExitOk ? "converged" : "epoch limit reached") << " after "
                << summary.epochs_completed << " epochs\n";
      return summary.exit_code;
    }
    if (i->parsed()) {
      if (!beta_text.empty()) infer.beta = parse_list(beta_text);
      infer.apply_global = !no_global;
      const auto frames = cli::cmd_infer(infer);
      std::cout << "wrote " << frames.size() << " frames to " << infer.out << '\n';
      return cli::kExitOk;
    }
    if (e->parsed()) {
      eval.align_translation = align;
      const auto summary = cli::cmd_eval(eval);
      for (const auto& r : summary.records) {
        std::cout << r.name << ": L2-V " << r.metrics.l2_v_cm << " cm, L2-J " << r.metrics.l2_j << ", L2-N "
                  << r.metrics.l2_n_deg << " deg, jitter " << r.metrics.jitter_cm << " cm\n";
      }
      return cli::kExitOk;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return cli::kExitError;
  }
  return cli::kExitError;
}
