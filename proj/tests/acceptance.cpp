// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
// Criteria 1-8 run at full size; criterion 9 compares two complete quick-mode
// verify reports produced with different thread counts.

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>

#include <bogo/verify.hpp>

namespace verify = bogo::verify;

namespace {

// wall-clock budgets in seconds; criteria without a stated budget get none
std::optional<double> budget(int id) {
  switch (id) {
    case 1: return 10.0;
    case 2: return 120.0;
    case 3: return 60.0;
    case 5: return 180.0;
    case 7: return 180.0;
    case 8: return 300.0;
    default: return std::nullopt;
  }
}

bool report(int id, const std::string& name, bool passed, double seconds, const std::string& detail) {
  const auto b = budget(id);
  const bool in_time = !b || seconds <= *b;
  const bool ok = passed && in_time;
  std::printf("%s  criterion %d: %s  [%.1f s%s]%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(), seconds,
              b ? (" / budget " + std::to_string(static_cast<int>(*b)) + " s").c_str() : "",
              detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
  return ok;
}

}  // namespace

int main() {
  verify::VerifyOptions v;
  v.threads = std::max(1u, std::thread::hardware_concurrency());
  bool all = true;
  for (int id = 1; id <= 8; ++id) {
    v.only = {id};
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = verify::run(v);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& r = rep.results.front();
    std::string detail;
    if (r.metrics.contains("error")) detail = "error: " + r.metrics["error"].get<std::string>();
    all = report(id, r.name, r.passed, s, detail) && all;
  }

  const auto t0 = std::chrono::steady_clock::now();
  verify::VerifyOptions q;
  q.quick = true;
  q.threads = 1;
  const std::string a = verify::json(verify::run(q)).dump();
  q.threads = 3;
  const std::string b = verify::json(verify::run(q)).dump();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  all = report(9, "quick verify report identical at 1 and 3 threads", a == b, s,
               "report bytes " + std::to_string(a.size())) && all;
  return all ? 0 : 1;
}
