#pragma once

#include "sefvc/autograd.hpp"
#include "sefvc/config.hpp"
#include "sefvc/discriminators.hpp"
#include "sefvc/dsp.hpp"
#include "sefvc/kmeans.hpp"
#include "sefvc/losses.hpp"
#include "sefvc/model.hpp"
#include "sefvc/nn.hpp"
#include "sefvc/ppe.hpp"
#include "sefvc/tensorfile.hpp"
#include "sefvc/toyfeat.hpp"
#include "sefvc/trainer.hpp"
#include "sefvc/vc_pipeline.hpp"
#include "sefvc/wav.hpp"
