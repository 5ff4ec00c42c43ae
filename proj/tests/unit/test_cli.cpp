#include "test_support.hpp"

#include "cli/commands.hpp"
#include "trj/io/obj.hpp"
#include "trj/train/model_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace trj;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Relative path → file content for every regular file under `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

int run(const std::string& args) {
  const std::string cmd = std::string(TRJ_EXECUTABLE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) lines.push_back(l);
  }
  return lines;
}

/// A small dataset shared by the training-related cases.
const fs::path& tiny_dataset() {
  static const fs::path dir = [] {
    const fs::path d = testing::temp_dir("cli_tiny");
    cli::SynthOptions o;
    o.out = d;
    o.sequences = 2;
    o.frames = 8;
    o.seed = 3;
    cli::cmd_synth(o);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth: defaults give five sequences of 64 frames with distinct shapes") {
  const fs::path dir = testing::temp_dir("cli_synth_default");
  cli::SynthOptions o;
  o.out = dir;
  CHECK(o.sequences == 5);
  CHECK(o.frames == 64);
  cli::cmd_synth(o);
  const auto data = io::load_dataset(dir);
  REQUIRE(data.size() == 5);
  for (size_t i = 0; i < data.size(); ++i) {
    CHECK(data[i].frames.size() == 64);
    for (size_t j = i + 1; j < data.size(); ++j) CHECK(data[i].manifest.beta != data[j].manifest.beta);
  }
}

TEST_CASE("synth: a fixed seed gives a byte-identical dataset") {
  const fs::path a = testing::temp_dir("cli_synth_a"), b = testing::temp_dir("cli_synth_b");
  for (const auto& d : {a, b}) {
    cli::SynthOptions o;
    o.out = d;
    o.sequences = 3;
    o.frames = 12;
    o.seed = 77;
    o.root_motion = true;
    cli::cmd_synth(o);
  }
  const auto sa = snapshot(a), sb = snapshot(b);
  CHECK(sa.size() == 3 * (12 + 2) + 1);
  CHECK(sa == sb);
}

TEST_CASE("synth and train: single-frame dataset is accepted") {
  const fs::path dir = testing::temp_dir("cli_one_frame");
  cli::SynthOptions o;
  o.out = dir / "data";
  o.sequences = 1;
  o.frames = 1;
  cli::cmd_synth(o);
  const auto data = io::load_dataset(o.out);
  REQUIRE(data[0].frames.size() == 1);
  CHECK((data[0].frames[0] - data[0].first_frame.vertices).norm() == 0.0);
  cli::TrainOptions t;
  t.dataset = o.out;
  t.checkpoint = dir / "model.trj";
  t.epochs = 2;
  t.quiet = true;
  const auto summary = cli::cmd_train(t);
  CHECK(summary.exit_code == cli::kExitOk);  // zero-initialized heads reproduce a static frame exactly
  CHECK(fs::exists(t.checkpoint));
}

TEST_CASE("train: capped run exits 2, resume continues the epoch numbering") {
  const fs::path dir = testing::temp_dir("cli_resume");
  cli::TrainOptions t;
  t.dataset = tiny_dataset();
  t.checkpoint = dir / "model.trj";
  t.epochs = 2;
  t.quiet = true;
  t.window = 5;
  const auto first = cli::cmd_train(t);
  CHECK(first.exit_code == cli::kExitEpochCapped);
  CHECK(first.epochs_completed == 2);
  std::vector<std::string> lines = read_lines(dir / "model.trj.log");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].rfind("0 ", 0) == 0);
  CHECK(lines[1].rfind("1 ", 0) == 0);

  t.resume = true;
  t.epochs = 4;
  const auto second = cli::cmd_train(t);
  CHECK(second.epochs_completed == 4);
  lines = read_lines(dir / "model.trj.log");
  REQUIRE(lines.size() == 4);
  CHECK(lines[2].rfind("2 ", 0) == 0);
  CHECK(lines[3].rfind("3 ", 0) == 0);
  const auto loaded = train::load_model(t.checkpoint);
  CHECK(loaded.state.epochs_completed == 4);

  // an uninterrupted 4-epoch run ends with the same weights
  cli::TrainOptions straight = t;
  straight.resume = false;
  straight.checkpoint = dir / "straight.trj";
  cli::cmd_train(straight);
  auto a = train::load_model(t.checkpoint).params;
  auto b = train::load_model(straight.checkpoint).params;
  const auto pa = a.parameters(), pb = b.parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("train: vertex ODE baseline trains on the same data") {
  const fs::path dir = testing::temp_dir("cli_vode");
  cli::TrainOptions t;
  t.dataset = tiny_dataset();
  t.checkpoint = dir / "vode.trj";
  t.baseline = "vertex_ode";
  t.epochs = 3;
  t.quiet = true;
  t.lr = 1e-3;
  const auto summary = cli::cmd_train(t);
  REQUIRE(summary.result.history.size() == 3);
  CHECK(summary.result.history.back().loss.vertex < summary.result.history.front().loss.vertex);
  CHECK(train::load_model(t.checkpoint).params.config().variant == motion::Variant::kVertexOde);
  t.baseline = "mystery";
  CHECK_THROWS(cli::cmd_train(t));
}

TEST_CASE("infer: 100-frame motion with window 32 gives 100 frames") {
  const fs::path dir = testing::temp_dir("cli_infer");
  cli::TrainOptions t;
  t.dataset = tiny_dataset();
  t.checkpoint = dir / "model.trj";
  t.epochs = 1;
  t.quiet = true;
  cli::cmd_train(t);

  io::SynthConfig sc;
  sc.frames = 100;
  sc.root_motion = true;
  io::SynthSequence seq = io::synth_generate(sc);
  io::write_sequence(dir / "long", seq);
  cli::InferOptions o;
  o.checkpoint = t.checkpoint;
  o.target = dir / "long" / "rest.obj";
  o.motion = dir / "long" / "motion.json";
  o.out = dir / "pred";
  const auto frames = cli::cmd_infer(o);
  CHECK(frames.size() == 100);
  CHECK(fs::exists(dir / "pred" / "frame_0099.obj"));
  CHECK_FALSE(fs::exists(dir / "pred" / "frame_0100.obj"));
  for (const auto& f : frames) CHECK(f.allFinite());
}

TEST_CASE("infer: non-manifold target is rejected") {
  const fs::path dir = testing::temp_dir("cli_nonmanifold");
  cli::TrainOptions t;
  t.dataset = tiny_dataset();
  t.checkpoint = dir / "model.trj";
  t.epochs = 1;
  t.quiet = true;
  cli::cmd_train(t);
  mesh::TriMesh fan;
  fan.vertices.resize(5, 3);
  fan.vertices << 0, 0, 0, 1, 0, 0, 0.5, 1, 0, 0.5, -1, 0, 0.5, 0, 1;
  fan.faces.resize(3, 3);
  fan.faces << 0, 1, 2, 1, 0, 3, 0, 1, 4;
  io::save_obj(dir / "fan.obj", fan);
  cli::InferOptions o;
  o.checkpoint = t.checkpoint;
  o.target = dir / "fan.obj";
  o.motion = tiny_dataset() / "seq_000" / "motion.json";
  o.out = dir / "pred";
  CHECK_THROWS_AS(cli::cmd_infer(o), MeshError);
  CHECK(run("infer --checkpoint " + t.checkpoint.string() + " --target " + o.target.string() + " --motion " +
            o.motion.string() + " --out " + o.out.string()) == cli::kExitError);
}

TEST_CASE("eval: ground truth scores zero, records sorted by name, missing frame named") {
  const fs::path dir = testing::temp_dir("cli_eval");
  const auto seq = io::load_sequence(tiny_dataset() / "seq_001" / "motion.json");
  const auto canonical = cli::canonical_frames(seq);
  for (const std::string name : {"zeta", "alpha", "mid"}) {
    std::vector<Positions> frames = canonical;
    if (name != "alpha") {
      for (auto& f : frames) f.col(1).array() += (name == "mid" ? 0.01 : 0.02);
    }
    cli::write_frames(dir / name, seq.first_frame.faces, frames);
  }
  cli::EvalOptions e;
  e.motion = seq.manifest_path;
  e.predictions = {dir / "zeta", dir / "alpha", dir / "mid"};
  e.out = dir / "metrics.json";
  const auto summary = cli::cmd_eval(e);
  REQUIRE(summary.records.size() == 3);
  CHECK(summary.records[0].name == "alpha");
  CHECK(summary.records[1].name == "mid");
  CHECK(summary.records[2].name == "zeta");
  CHECK(summary.records[0].metrics.l2_v_cm == 0.0);
  CHECK(summary.records[0].metrics.l2_j == 0.0);
  CHECK(summary.records[0].metrics.l2_n_deg == 0.0);
  CHECK(summary.records[1].metrics.l2_v_cm == doctest::Approx(1.0).epsilon(1e-9));
  const auto json = nlohmann::json::parse(slurp(e.out));
  CHECK(json["records"].size() == 3);
  CHECK(json["records"][2]["name"] == "zeta");

  fs::remove(dir / "mid" / "frame_0005.obj");
  try {
    cli::cmd_eval(e);
    FAIL("expected missing frame error");
  } catch (const IoError& err) {
    CHECK(std::string(err.what()).find("frame 5") != std::string::npos);
  }
  cli::write_frames(dir / "extra", seq.first_frame.faces, std::vector<Positions>(canonical.size() + 1, canonical[0]));
  e.predictions = {dir / "extra"};
  CHECK_THROWS_AS(cli::cmd_eval(e), IoError);
}

TEST_CASE("executable: exit codes and config file") {
  const fs::path dir = testing::temp_dir("cli_exe");
  CHECK(run("") > 2);
  CHECK(run("train --dataset " + (dir / "missing").string() + " --checkpoint " + (dir / "m.trj").string()) ==
        cli::kExitError);
  std::ofstream(dir / "synth.ini") << "[synth]\nsequences=1\nframes=3\nseed=5\n";
  CHECK(run("--config " + (dir / "synth.ini").string() + " synth --out " + (dir / "data").string() + " --frames 4") ==
        cli::kExitOk);
  const auto data = io::load_dataset(dir / "data");
  REQUIRE(data.size() == 1);
  CHECK(data[0].frames.size() == 4);
  CHECK(run("train --dataset " + (dir / "data").string() + " --checkpoint " + (dir / "m.trj").string() +
            " --epochs 1 --quiet --convergence 0") == cli::kExitEpochCapped);
  CHECK(run("train --dataset " + (dir / "data").string() + " --checkpoint " + (dir / "m.trj").string() +
            " --epochs 1 --quiet --convergence 1") == cli::kExitOk);
}
