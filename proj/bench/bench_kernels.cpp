// Benchmark comparing the OpenMP kernels against their serial references.
// Prints one row per kernel with serial time, parallel time, speedup, and a
// bitwise-equality check. --quick shrinks the problem sizes so the binary can
// double as a smoke test under ctest.

#include <omp.h>

#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "facekit/core/rng.hpp"
#include "facekit/kernels/kernels.hpp"

namespace {

using facekit::Rng;
namespace k = facekit::kernels;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
  return v;
}

struct Row {
  std::string name;
  double serial_s = 0.0;
  double parallel_s = 0.0;
  bool equal = false;
};

Row time_pair(const std::string& name, int reps,
              const std::function<void(double*)>& serial_fn,
              const std::function<void(double*)>& parallel_fn,
              std::size_t out_elems) {
  std::vector<double> out_serial(out_elems), out_parallel(out_elems);
  // Warm-up pass so page faults and thread-pool start-up stay out of the
  // measurement.
  serial_fn(out_serial.data());
  parallel_fn(out_parallel.data());

  Row row;
  row.name = name;
  double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) serial_fn(out_serial.data());
  row.serial_s = (omp_get_wtime() - t0) / reps;
  t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) parallel_fn(out_parallel.data());
  row.parallel_s = (omp_get_wtime() - t0) / reps;
  row.equal = std::memcmp(out_serial.data(), out_parallel.data(),
                          out_elems * sizeof(double)) == 0;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") quick = true;
  }

  const std::size_t mm = quick ? 64 : 384;      // matmul dimension
  const std::size_t pn = quick ? 48 : 256;      // pairwise rows
  const std::size_t pd = quick ? 32 : 512;      // pairwise dim
  const std::size_t rs = quick ? 40 : 192;      // resize source side
  const std::size_t rd = quick ? 56 : 224;      // resize dest side
  const int reps = quick ? 2 : 5;

  auto a = random_vec(mm * mm, 1);
  auto b = random_vec(mm * mm, 2);
  auto p = random_vec(pn * pd, 3);
  auto img = random_vec(rs * rs * 3, 4);
  for (auto& x : img) x = (x + 1.0) * 0.5;

  std::vector<Row> rows;
  rows.push_back(time_pair(
      "matmul", reps,
      [&](double* o) { k::serial::matmul(a.data(), b.data(), o, mm, mm, mm); },
      [&](double* o) { k::matmul(a.data(), b.data(), o, mm, mm, mm); },
      mm * mm));
  rows.push_back(time_pair(
      "matmul_nt", reps,
      [&](double* o) {
        k::serial::matmul_nt(a.data(), b.data(), o, mm, mm, mm);
      },
      [&](double* o) { k::matmul_nt(a.data(), b.data(), o, mm, mm, mm); },
      mm * mm));
  rows.push_back(time_pair(
      "matmul_tn", reps,
      [&](double* o) {
        k::serial::matmul_tn(a.data(), b.data(), o, mm, mm, mm);
      },
      [&](double* o) { k::matmul_tn(a.data(), b.data(), o, mm, mm, mm); },
      mm * mm));
  rows.push_back(time_pair(
      "pairwise_sqeuclidean", reps,
      [&](double* o) { k::serial::pairwise_sqeuclidean(p.data(), o, pn, pd); },
      [&](double* o) { k::pairwise_sqeuclidean(p.data(), o, pn, pd); },
      pn * pn));
  rows.push_back(time_pair(
      "pairwise_cosine", reps,
      [&](double* o) { k::serial::pairwise_cosine(p.data(), o, pn, pd); },
      [&](double* o) { k::pairwise_cosine(p.data(), o, pn, pd); },
      pn * pn));
  rows.push_back(time_pair(
      "resize_bilinear", reps,
      [&](double* o) {
        k::serial::resize_bilinear(img.data(), rs, rs, o, rd, rd);
      },
      [&](double* o) { k::resize_bilinear(img.data(), rs, rs, o, rd, rd); },
      rd * rd * 3));

  std::printf("threads: %d%s\n", omp_get_max_threads(),
              quick ? " (quick mode)" : "");
  std::printf("%-22s %12s %12s %9s %8s\n", "kernel", "serial (ms)",
              "openmp (ms)", "speedup", "bitwise");
  bool all_equal = true;
  for (const auto& r : rows) {
    double speedup = r.parallel_s > 0.0 ? r.serial_s / r.parallel_s : 0.0;
    std::printf("%-22s %12.3f %12.3f %8.2fx %8s\n", r.name.c_str(),
                r.serial_s * 1e3, r.parallel_s * 1e3, speedup,
                r.equal ? "equal" : "DIFFER");
    all_equal = all_equal && r.equal;
  }
  if (!all_equal) {
    std::fprintf(stderr, "kernel outputs differ from serial reference\n");
    return 1;
  }
  return 0;
}
