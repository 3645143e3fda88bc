#ifndef RANDCLT_RANDCLT_HPP
#define RANDCLT_RANDCLT_HPP

#include "randclt/distance.hpp"
#include "randclt/error.hpp"
#include "randclt/expansions.hpp"
#include "randclt/experiment.hpp"
#include "randclt/moments.hpp"
#include "randclt/normal.hpp"
#include "randclt/parallel.hpp"
#include "randclt/quadrature.hpp"
#include "randclt/random.hpp"
#include "randclt/sphere.hpp"
#include "randclt/systems.hpp"

#endif
