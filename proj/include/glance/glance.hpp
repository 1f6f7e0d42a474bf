#pragma once

#include "glance/attention.hpp"
#include "glance/checkpoint.hpp"
#include "glance/detect.hpp"
#include "glance/dwn.hpp"
#include "glance/errors.hpp"
#include "glance/gaze_data.hpp"
#include "glance/geometry.hpp"
#include "glance/image.hpp"
#include "glance/image_io.hpp"
#include "glance/model_io.hpp"
#include "glance/mosaic.hpp"
#include "glance/rng.hpp"
#include "glance/roi.hpp"
#include "glance/scene.hpp"
#include "glance/sim.hpp"
#include "glance/sim_config.hpp"
#include "glance/stabilization.hpp"
#include "glance/svg.hpp"
#include "glance/training.hpp"
