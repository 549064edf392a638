#pragma once

// Umbrella header for the whole library.
#include "fracwave/checkpoint.hpp"
#include "fracwave/error.hpp"
#include "fracwave/evolve.hpp"
#include "fracwave/experiments.hpp"
#include "fracwave/fft.hpp"
#include "fracwave/fit.hpp"
#include "fracwave/grid.hpp"
#include "fracwave/groundstate.hpp"
#include "fracwave/io.hpp"
#include "fracwave/krylov.hpp"
#include "fracwave/linop.hpp"
#include "fracwave/modulation.hpp"
#include "fracwave/profile.hpp"
#include "fracwave/spectral.hpp"
