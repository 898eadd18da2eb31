// Library walkthrough: simulate one Model 2 panel, then compare SC and SBC
// counterfactuals for the treated unit over the forecast horizon.

#include <cstdio>

#include "sbc/simulation.hpp"

int main() {
  sbc::sim::SimulationSpec spec;
  spec.model = sbc::sim::Model::Model2;
  spec.t0 = 120;
  spec.phi = 0.8;
  const auto simulated = sbc::sim::generate(spec, 42);

  const auto regime = sbc::WeightRegime::simplex();
  const auto sc = sbc::sc_estimate(simulated.panel, spec.filter(), regime);
  const auto sbc = sbc::sbc_estimate(simulated.panel, spec.filter(), regime);

  std::printf("period  actual      SC          SBC\n");
  for (int k = 0; k < sbc.horizon(); ++k) {
    std::printf("%-6d  %-10.4f  %-10.4f  %-10.4f\n", spec.t0 + k + 1, simulated.truth_post(k),
                sc.post_counterfactual(k), sbc.post_counterfactual(k));
  }
  std::printf("pre-period MSE: SC %.4f, SBC %.4f\n", sc.pre_mse, sbc.pre_mse);

  const auto cmp = sbc::weight_comparison(simulated.panel, spec.filter(), regime);
  std::printf("\ndonor   w_raw   w_trend  w_cycle\n");
  for (std::size_t d = 0; d < cmp.donors.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    std::printf("%-6s  %.3f   %.3f    %.3f\n", cmp.donors[d].c_str(), cmp.raw.weights(i), cmp.trend.weights(i),
                cmp.cycle.weights(i));
  }
}
