// Acceptance suite: one [PASS]/[FAIL] line per criterion followed by the measured values and
// the thresholds they were compared against. Thresholds live next to each check in
// src/verify.cpp. Exits 1 when any criterion fails.

#include <iostream>

#include "qalign/verify.hpp"

int main() {
  const auto results = qalign::run_verify();
  std::cout << qalign::verify_report_text(results);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << "\n" << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size()
            << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
