// Parallel kernels against their serial references.

#include "stemnav/catenary_table.hpp"
#include "stemnav/sensing.hpp"

#include <benchmark/benchmark.h>

#if defined(STEMNAV_HAVE_OPENMP)
#include <omp.h>
#endif

using namespace stemnav;

namespace {

Scene city() {
  Scene s;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      if (i != 0 || j != 0) s.obstacles.push_back(ConvexObstacle::box({8.0 * i - 2, 8.0 * j - 2, 0}, {8.0 * i + 2, 8.0 * j + 2, 12}));
  return s;
}

LidarConfig fine_lidar() {
  LidarConfig c;
  c.angular_resolution_rad = 0.25 * std::numbers::pi / 180.0;
  c.sample_step_m = 0.01;
  return c;
}

void BM_ScanParallel(benchmark::State& state) {
  const Scene scene = city();
  const LidarConfig cfg = fine_lidar();
  const Vec3 p(0, 0, 5);
  for (auto _ : state) benchmark::DoNotOptimize(scan_plane(p, ScanPlane::horizontal(p), cfg, scene, 1));
}

// windowed kernel pinned to one thread; isolates threading from the algorithm
void BM_ScanOneThread(benchmark::State& state) {
  const Scene scene = city();
  const LidarConfig cfg = fine_lidar();
  const Vec3 p(0, 0, 5);
#if defined(STEMNAV_HAVE_OPENMP)
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
#endif
  for (auto _ : state) benchmark::DoNotOptimize(scan_plane(p, ScanPlane::horizontal(p), cfg, scene, 1));
#if defined(STEMNAV_HAVE_OPENMP)
  omp_set_num_threads(threads);
#endif
}

void BM_ScanSerial(benchmark::State& state) {
  const Scene scene = city();
  const LidarConfig cfg = fine_lidar();
  const Vec3 p(0, 0, 5);
  for (auto _ : state) benchmark::DoNotOptimize(scan_plane_reference(p, ScanPlane::horizontal(p), cfg, scene, 1));
}

CatenaryGrid bench_grid() {
  CatenaryGrid g;
  g.horizontal_max_m = 8.0;
  g.vertical_max_m = 4.0;
  g.length_max_m = 10.0;
  return g;
}

void BM_TableParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_catenary_table(TetherParams{}, bench_grid()));
}

void BM_TableSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_catenary_table_serial(TetherParams{}, bench_grid()));
}

}  // namespace

BENCHMARK(BM_ScanParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanOneThread)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TableParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TableSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
