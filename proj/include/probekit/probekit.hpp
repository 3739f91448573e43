#pragma once

#include "probekit/bench.hpp"
#include "probekit/common.hpp"
#include "probekit/config.hpp"
#include "probekit/dataset.hpp"
#include "probekit/extract.hpp"
#include "probekit/mat.hpp"
#include "probekit/model.hpp"
#include "probekit/pooling.hpp"
#include "probekit/probe.hpp"
#include "probekit/prompt.hpp"
#include "probekit/store.hpp"
#include "probekit/surgeon.hpp"
#include "probekit/sweep.hpp"
#include "probekit/tokenizer.hpp"
