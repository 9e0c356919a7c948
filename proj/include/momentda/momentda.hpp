#pragma once

#include "momentda/error.hpp"
#include "momentda/polybasis.hpp"
#include "momentda/quadrature.hpp"
#include "momentda/random.hpp"
#include "momentda/moment_vector.hpp"
#include "momentda/density.hpp"
#include "momentda/maxent.hpp"
#include "momentda/metrics.hpp"
#include "momentda/smoothness.hpp"
#include "momentda/bounds.hpp"
#include "momentda/experiments.hpp"
