// Tail-sum inequality on the hand example abar = (1, 2, 4), T = 3.
#include <cstdio>

#include "swat/verify/bounds.hpp"

int main() {
  for (const auto& rep : swat::check_tail_sums({swat::fixed_tail_cases().front()}, 1'000'000, false))
    std::printf("%s: %s  max ratio %.4f  %s\n", rep.lemma.c_str(), rep.statement.c_str(), rep.max_ratio,
                rep.pass() ? "ok" : "VIOLATED");
}
