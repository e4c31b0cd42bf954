#pragma once

#include "beamforming.hpp"
#include "complex_matrix.hpp"
#include "covariance_opt.hpp"
#include "ellipsoid.hpp"
#include "endpoints.hpp"
#include "estimator.hpp"
#include "hermitian.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"
