#ifndef HEATSC_HEATSC_HPP
#define HEATSC_HEATSC_HPP

#include "heatsc/errors.hpp"
#include "heatsc/quadrature.hpp"
#include "heatsc/geometry.hpp"
#include "heatsc/fields.hpp"
#include "heatsc/parametrix.hpp"
#include "heatsc/spectral_oracle.hpp"
#include "heatsc/regression.hpp"
#include "heatsc/partition.hpp"
#include "heatsc/parallel.hpp"
#include "heatsc/io.hpp"
#include "heatsc/config.hpp"
#include "heatsc/commands.hpp"

#endif  // HEATSC_HEATSC_HPP
