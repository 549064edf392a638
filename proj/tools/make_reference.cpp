// Prints tests/reference_constants.hpp: the regression constants asserted by
// the test suite, computed on the fine reference grids.
#include <cstdio>

#include "fracwave/linop.hpp"

using namespace fracwave;

int main() {
  const double tol = 1e-12;
  const GroundState q4096 = petviashvili(3, 1.0, Grid(4096.0, 1 << 16), tol, 5000);
  const GroundState a = petviashvili(3, 1.0, Grid(2048.0, 1 << 16), tol, 5000);
  const GroundState b = petviashvili(3, 1.0, Grid(4096.0, 1 << 17), tol, 5000);
  const double real_line = (4.0 * b.int_q2 - a.int_q2) / 3.0;
  const GroundState ref = petviashvili(3, 1.0, Grid(8192.0, 1 << 18), tol, 5000);
  const LinearizedOperator L(ref);
  const auto pairs = L.spectrum_bottom(1);
  const EigenPair inv = L.ground_eigenpair(pairs[0].value - 0.5);

  std::printf("#pragma once\n\n");
  std::printf("// Regression constants produced by tools/make_reference. Regenerate with\n");
  std::printf("//   build/tools/make_reference > tests/reference_constants.hpp\n");
  std::printf("namespace fwref {\n");
  std::printf("// int Q^2 on L = 4096, n = 2^16, tol 1e-12\n");
  std::printf("inline constexpr double int_q2_L4096_n65536 = %.15g;\n", q4096.int_q2);
  std::printf("// int Q^2 extrapolated from L = 2048 and 4096 at spacing 1/32, error O(L^-2) removed\n");
  std::printf("inline constexpr double int_q2_real_line = %.15g;\n", real_line);
  std::printf("// negative eigenvalue of L on L = 8192, n = 2^18 (Lanczos %.15g, inverse iteration %.15g)\n",
              pairs[0].value, inv.value);
  std::printf("inline constexpr double kappa0 = %.15g;\n", -inv.value);
  std::printf("}  // namespace fwref\n");
}
