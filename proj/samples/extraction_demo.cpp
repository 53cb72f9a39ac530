// Builds the relative-position extraction network for the demo spec and
// compares its softmax scratch block with the hardmax oracle as T grows.
#include <cstdio>

#include "swat/construct/theorem1.hpp"
#include "swat/verify/construct.hpp"

int main() {
  using namespace swat;
  const SmoothnessSpec spec = theorem1_demo_spec();
  Rng rng = make_rng(1);
  for (double T : {2.0, 4.0, 6.0, 8.0}) {
    const ExtractionPlan plan = make_extraction_plan(spec, 1, T);
    const TransformerParams net = build_theorem1_network(plan);
    Eigen::MatrixXd data(1, 2 * plan.U + 1);
    for (Eigen::Index i = 0; i < data.size(); ++i) data(i) = uniform(rng);
    const auto check = check_extraction(plan, net, TokenWindow(-plan.U, data), {0, 0});
    std::printf("T=%.0f  H=%ld U=%d chi=%.2f  deviation %.3g  bound %.3g  %s\n", T, static_cast<long>(plan.heads()),
                plan.U, plan.chi, check.deviation, check.bound, check.pass() ? "ok" : "VIOLATED");
  }
}
