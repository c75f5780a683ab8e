/*
 * absim.hh
 *
 * umbrella include
 */

#ifndef ABSIM_ABSIM_HH_
#define ABSIM_ABSIM_HH_

#include "absim/abstraction.hh"
#include "absim/error.hh"
#include "absim/expr.hh"
#include "absim/integrate.hh"
#include "absim/io.hh"
#include "absim/lattice.hh"
#include "absim/synthesis.hh"
#include "absim/system.hh"
#include "absim/transition_system.hh"

#endif /* ABSIM_ABSIM_HH_ */
