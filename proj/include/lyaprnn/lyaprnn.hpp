#pragma once

// Umbrella header: stochastic Lyapunov spectra of input-driven recurrent
// network dynamics via tangent-space propagation with sequential QR.

#include "lyaprnn/cells.hpp"
#include "lyaprnn/ensembles.hpp"
#include "lyaprnn/errors.hpp"
#include "lyaprnn/estimator.hpp"
#include "lyaprnn/features.hpp"
#include "lyaprnn/io.hpp"
#include "lyaprnn/linalg.hpp"
#include "lyaprnn/oracle.hpp"
#include "lyaprnn/rng.hpp"
#include "lyaprnn/selfcheck.hpp"
