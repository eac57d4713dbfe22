#pragma once

#include <string>
#include <vector>

#include "eqlab/generator_system.hpp"
#include "eqlab/torus_point.hpp"

namespace eqlab {

// Bundled generator systems.
//  F1: [[1,2],[0,1]], [[1,0],[2,1]] and inverses, uniform.
//  F2: diag(w, a0), diag(w, a1) and inverses in SL_4(Z), w the quarter
//      rotation, a0 = [[1,1],[0,1]], a1 = [[1,0],[1,1]]; labels in Z/4 track
//      the power of w (1 for A0, A1 and 3 for the inverses).
//  F3: block-diagonal pair acting on Z^2 + Z^2 through F1 on the first
//      block and through the unipotent pair a0, a1 on the second.
//  F4: the single generator [[2,1],[1,1]].
GeneratorSystem fixture_f1();
GeneratorSystem fixture_f2();
GeneratorSystem fixture_f3();
GeneratorSystem fixture_f4();
GeneratorSystem fixture_identity(std::size_t dim);
GeneratorSystem fixture_by_name(const std::string& name);
std::vector<std::string> fixture_names();

// Irrational starting points used by the bundled experiments:
// (sqrt2 - 1, sqrt3 - 1) in dimension 2 and
// (sqrt2 - 1, sqrt3 - 1, sqrt5 - 2, sqrt7 - 2) in dimension 4.
StartPoint surd_start(std::size_t dim);

}  // namespace eqlab
