// Compares the serial reference statistics kernels against the OpenMP path
// and checks that both produce bit-identical results.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "caseforge/metrics.hpp"
#include "caseforge/rng.hpp"

using namespace caseforge;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<ScoredItem> synthetic_items(size_t n, std::uint64_t seed) {
  std::vector<ScoredItem> items;
  items.reserve(n);
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    ScoredItem item;
    const auto kind = rng.below(3);
    item.kind = kind == 0 ? ItemKind::kOrgan : kind == 1 ? ItemKind::kNeoplasm : ItemKind::kDiffDx;
    item.organ_score = static_cast<double>(rng.below(5)) / 4.0;
    item.truth_positive = rng.uniform() < 0.65;
    item.pred_positive = rng.uniform() < 0.6;
    item.correct = rng.uniform() < 0.55;
    items.push_back(item);
  }
  return items;
}

std::vector<EvalItem> synthetic_eval_items(size_t n) {
  std::vector<EvalItem> items;
  Rng rng(7);
  for (size_t i = 0; i < n; ++i) {
    EvalItem item;
    item.item_id = "b" + std::to_string(i);
    if (i % 2 == 0) {
      item.kind = ItemKind::kNeoplasm;
      item.truth = rng.uniform() < 0.65 ? "yes" : "no";
    } else {
      item.kind = ItemKind::kDiffDx;
      const size_t k = 3 + rng.below(2);
      for (size_t o = 0; o < k; ++o) item.options.push_back("option" + std::to_string(o));
      item.truth = item.options.front();
    }
    items.push_back(item);
  }
  return items;
}

bool reports_equal(const MetricsReport& a, const MetricsReport& b) {
  return a.to_json() == b.to_json();
}

}  // namespace

int main(int argc, char** argv) {
  size_t n_items = 317;
  int resamples = 10000;
  int trials = 100000;
  if (argc > 1) n_items = static_cast<size_t>(std::atoll(argv[1]));
  if (argc > 2) resamples = std::atoi(argv[2]);
  if (argc > 3) trials = std::atoi(argv[3]);

#ifdef _OPENMP
  std::cout << "OpenMP enabled, max threads " << omp_get_max_threads() << "\n";
#else
  std::cout << "OpenMP not available; both paths run serially\n";
#endif
  std::cout << "items=" << n_items << " resamples=" << resamples << " trials=" << trials
            << "\n\n";
  std::cout << std::left << std::setw(26) << "kernel" << std::setw(12) << "serial (s)"
            << std::setw(12) << "openmp (s)" << "speedup\n";

  const auto scored = synthetic_items(n_items, 42);
  CiConfig serial_ci{resamples, 42, false};
  CiConfig parallel_ci{resamples, 42, true};

  auto t0 = std::chrono::steady_clock::now();
  const MetricsReport serial_report = compute_metrics(scored, serial_ci, "bench");
  const double serial_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const MetricsReport parallel_report = compute_metrics(scored, parallel_ci, "bench");
  const double parallel_s = seconds_since(t0);

  if (!reports_equal(serial_report, parallel_report)) {
    std::cerr << "FAIL: bootstrap serial and parallel outputs differ\n";
    return 1;
  }
  std::cout << std::left << std::setw(26) << "bootstrap_ci" << std::setw(12) << serial_s
            << std::setw(12) << parallel_s << (parallel_s > 0 ? serial_s / parallel_s : 0.0)
            << "\n";

  const auto eval_items = synthetic_eval_items(n_items);
  t0 = std::chrono::steady_clock::now();
  const MetricsReport serial_baseline = random_baseline(eval_items, 42, trials, false);
  const double serial_mc = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const MetricsReport parallel_baseline = random_baseline(eval_items, 42, trials, true);
  const double parallel_mc = seconds_since(t0);

  if (!reports_equal(serial_baseline, parallel_baseline)) {
    std::cerr << "FAIL: Monte-Carlo serial and parallel outputs differ\n";
    return 1;
  }
  std::cout << std::left << std::setw(26) << "random_baseline" << std::setw(12) << serial_mc
            << std::setw(12) << parallel_mc << (parallel_mc > 0 ? serial_mc / parallel_mc : 0.0)
            << "\n";

  std::cout << "\nserial and OpenMP outputs are identical\n";
  return 0;
}
