// Serial vs OpenMP timings for the two parallel kernels: metric counting over
// a synthetic corpus, and run_batch over the demo test set with a simulated
// backend (optionally with per-request latency to mimic network calls).
//   bench --corpus 2000000 --threads 4 --latency-ms 5

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <thread>

#include "cofcot/experiment.hpp"

using namespace cofcot;

namespace {

template <typename F>
double seconds(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class SlowBackend : public Backend {
 public:
  SlowBackend(Backend& inner, int latency_ms) : inner_(inner), latency_(latency_ms) {}
  CompletionResponse complete(const CompletionRequest& req) override {
    std::this_thread::sleep_for(latency_);
    return inner_.complete(req);
  }

 private:
  Backend& inner_;
  std::chrono::milliseconds latency_;
};

void bench_metrics(std::size_t n, int threads) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> intents = {"GET_WEATHER", "SET_ALARM", "CREATE_REMINDER", "SEND_MESSAGE"};
  const std::vector<std::string> types = {"DATE_TIME", "LOCATION", "TODO", "RECIPIENT", "CONTENT"};
  const std::vector<std::string> words = {"tomorrow", "at 7pm", "mike", "paris", "buy milk", "the dentist"};
  auto form = [&] {
    LogicForm lf{intents[rng() % intents.size()], {}};
    for (std::size_t i = rng() % 4; i > 0; --i) lf.slots.push_back({types[rng() % types.size()], words[rng() % words.size()]});
    return lf;
  };
  std::vector<LogicForm> golds(n);
  std::vector<Prediction> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    golds[i] = form();
    preds[i] = rng() % 10 == 0 ? std::nullopt : std::optional<LogicForm>(rng() % 2 ? golds[i] : form());
  }
  CorpusCounts a, b;
  const double ts = seconds([&] { a = count_serial(preds, golds); });
  const double tp = seconds([&] { b = count_parallel(preds, golds, threads); });
  std::printf("%-28s %10zu %10.3f %10.3f %8.2fx %s\n", "metric counting", n, ts, tp, ts / tp,
              a == b ? "identical" : "MISMATCH");
}

void bench_batch(const std::string& config, int threads, int latency_ms, std::size_t repeat) {
  RunConfig cfg = load_run_config(config);
  cfg.backend = BackendMode::Mock;
  const RunContext ctx = prepare_run(cfg);
  std::vector<Example> examples;
  for (std::size_t r = 0; r < repeat; ++r) {
    for (const auto& ts : ctx.test_sets) examples.insert(examples.end(), ts.examples.begin(), ts.examples.end());
  }
  SimulatedLlm sim(ctx.dataset.examples, cfg.mock_noise);
  SlowBackend backend(sim, latency_ms);
  std::vector<PipelineResult> a, b;
  const double ts = seconds([&] { a = run_batch(ctx, examples, backend, 1); });
  const double tp = seconds([&] { b = run_batch(ctx, examples, backend, threads); });
  char label[64];
  std::snprintf(label, sizeof label, "run_batch (%d ms latency)", latency_ms);
  std::printf("%-28s %10zu %10.3f %10.3f %8.2fx %s\n", label, examples.size(), ts, tp, ts / tp,
              a == b ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel timings"};
  std::size_t corpus = 1000000;
  int threads = std::max(2, omp_get_max_threads());
  int latency_ms = 0;
  std::size_t repeat = 5;
  std::string config = COFCOT_DEMO_CONFIG;
  app.add_option("--corpus", corpus, "Synthetic corpus size for metric counting");
  app.add_option("--threads", threads, "Parallel thread count")->check(CLI::PositiveNumber);
  app.add_option("--latency-ms", latency_ms, "Simulated per-request latency")->check(CLI::NonNegativeNumber);
  app.add_option("--repeat", repeat, "Copies of the demo test set in the batch");
  app.add_option("--config", config, "Run config for the batch benchmark");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads: %d (hardware: %u)\n", threads, std::thread::hardware_concurrency());
  std::printf("%-28s %10s %10s %10s %9s %s\n", "kernel", "items", "serial s", "parallel s", "speedup", "results");
  bench_metrics(corpus, threads);
  bench_batch(config, threads, 0, repeat);
  if (latency_ms > 0) bench_batch(config, threads, latency_ms, 1);
  return 0;
}
