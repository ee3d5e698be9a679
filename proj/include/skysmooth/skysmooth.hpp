#pragma once

#include "skysmooth/config.hpp"
#include "skysmooth/ddpg.hpp"
#include "skysmooth/geometry.hpp"
#include "skysmooth/gradcheck.hpp"
#include "skysmooth/metrics.hpp"
#include "skysmooth/nn.hpp"
#include "skysmooth/plot.hpp"
#include "skysmooth/rewards.hpp"
#include "skysmooth/rng.hpp"
#include "skysmooth/scene.hpp"
#include "skysmooth/sim.hpp"
