// Straight-trace pi filter on the example-1 board: objectives, a coarse S21
// sweep, and the ESL / L1 studies. Prints plain text.

#include <cstdio>

#include "ddtd/ddtd.hpp"

using namespace ddtd;

int main() {
  const RunConfig cfg = preset_config("example1");
  const Grid grid(cfg.geometry);
  const DensityField field = reference_layout(grid);
  const ResolvedLayout layout = ResolvedLayout::resolve(grid, field);

  const EvalRecord r = evaluate(layout, cfg.physics, cfg.components, cfg.targets);
  std::printf("grid %dx%d, %zu design nodes\n", grid.nx(), grid.ny(), grid.design_size());
  std::printf("J1 %.2f dB  J2 %.2f dB  G %.2f dB  %s\n\n", r.j1_db, r.j2_db, r.g_db,
              r.feasible ? "FEASIBLE" : "INFEASIBLE");

  const SweepResult s = sweep(layout, cfg.physics, cfg.components, 1e3, 100e6, 2);
  std::printf("%12s %10s\n", "freq_hz", "s21_db");
  for (std::size_t i = 0; i < s.frequencies.size(); ++i)
    std::printf("%12.4g %10.2f\n", s.frequencies[i], to_db(s.s21[i], cfg.physics.db_floor));

  const double dip = find_dip_frequency(layout, cfg.physics, cfg.components, 1e3, 10e6);
  std::printf("\nshunt dip near %.4g Hz\n", dip);

  std::printf("\nESL at 10 MHz\n");
  for (const auto& row : esl_esr_study(layout, cfg.physics, cfg.components, {1e-9, 5e-9, 10e-9}, {0.0}, 10e6))
    std::printf("  %4.0f nH  %8.2f dB\n", row.esl * 1e9, row.s21_db);

  const auto [base, doubled] = l1_doubling_study(layout, cfg.physics, cfg.components, 10e6);
  std::printf("\nL1 10 -> 20 uH at 10 MHz: %.2f -> %.2f dB (%+.2f)\n", base, doubled, doubled - base);
  return 0;
}
