#include "trj/features/features.hpp"
#include "trj/io/synth.hpp"
#include "trj/mesh/poisson.hpp"
#include "trj/mesh/primitives.hpp"
#include "trj/motion/model.hpp"

#include <benchmark/benchmark.h>

using namespace trj;

namespace {

const io::SynthSequence& walk() {
  static const io::SynthSequence seq = [] {
    io::SynthConfig sc;
    sc.frames = 32;
    return io::synth_generate(sc);
  }();
  return seq;
}

void BM_PoissonPrefactorize(benchmark::State& state) {
  const mesh::TriMesh m = mesh::icosphere(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mesh::PoissonSystem::prefactorize(m));
  state.counters["faces"] = m.num_faces();
}
BENCHMARK(BM_PoissonPrefactorize)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

void BM_PoissonSolve(benchmark::State& state) {
  const mesh::TriMesh m = mesh::icosphere(static_cast<int>(state.range(0)));
  const auto sys = mesh::PoissonSystem::prefactorize(m);
  const RowMatrix j = mesh::compute_jacobians(m, sys.bases(), sys.gradient(), m.vertices * 1.1).to_rows();
  for (auto _ : state) benchmark::DoNotOptimize(sys.solve_rows(j));
  state.counters["faces"] = m.num_faces();
}
BENCHMARK(BM_PoissonSolve)->DenseRange(2, 4)->Unit(benchmark::kMicrosecond);

void BM_WaveKernelSignature(benchmark::State& state) {
  const mesh::TriMesh& m = walk().rig.rest;
  for (auto _ : state) benchmark::DoNotOptimize(features::wave_kernel_signature_vertices(m, features::WksConfig{}));
}
BENCHMARK(BM_WaveKernelSignature)->Unit(benchmark::kMillisecond);

void BM_WindowForward(benchmark::State& state) {
  const io::SynthSequence& seq = walk();
  const motion::ShapeContext ctx = motion::ShapeContext::build(seq.rig.rest);
  motion::ModelConfig cfg;
  cfg.variant = static_cast<motion::Variant>(state.range(0));
  const motion::ModelParams params(cfg, false);
  motion::MotionInput m;
  m.angles = seq.manifest.angles;
  m.beta = seq.manifest.beta;
  for (auto _ : state) {
    nn::Tape tape;
    benchmark::DoNotOptimize(motion::forward_window(params, tape, ctx, m, 0, 32, motion::WindowCarry{}));
  }
  state.SetLabel(motion::to_string(cfg.variant));
}
BENCHMARK(BM_WindowForward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_WindowForwardBackward(benchmark::State& state) {
  const io::SynthSequence& seq = walk();
  const motion::ShapeContext ctx = motion::ShapeContext::build(seq.rig.rest);
  motion::ModelParams params(motion::ModelConfig{}, false);
  motion::MotionInput m;
  m.angles = seq.manifest.angles;
  m.beta = seq.manifest.beta;
  for (auto _ : state) {
    nn::Tape tape;
    const auto out = motion::forward_window(params, tape, ctx, m, 0, 32, motion::WindowCarry{});
    tape.backward(nn::sum_squares(out.positions));
  }
}
BENCHMARK(BM_WindowForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
