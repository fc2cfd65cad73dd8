#ifndef HJNET_HJNET_HPP_
#define HJNET_HJNET_HPP_

#include "hjnet/errors.hpp"
#include "hjnet/netgrid.hpp"
#include "hjnet/hamiltonian.hpp"
#include "hjnet/catalog.hpp"
#include "hjnet/stationary.hpp"
#include "hjnet/cauchy.hpp"
#include "hjnet/analysis.hpp"
#include "hjnet/lab.hpp"

#endif  // HJNET_HJNET_HPP_
