#pragma once
// Umbrella header.

#include "relaxfree/errors.hpp"
#include "relaxfree/expm.hpp"
#include "relaxfree/four_level.hpp"
#include "relaxfree/io.hpp"
#include "relaxfree/model.hpp"
#include "relaxfree/n_chain.hpp"
#include "relaxfree/ode.hpp"
#include "relaxfree/oracle.hpp"
#include "relaxfree/propagator.hpp"
#include "relaxfree/roots.hpp"
#include "relaxfree/scenario.hpp"
#include "relaxfree/three_level.hpp"
#include "relaxfree/verify.hpp"
