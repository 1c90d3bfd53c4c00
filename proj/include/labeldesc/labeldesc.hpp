// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include "labeldesc/config.hpp"
#include "labeldesc/core.hpp"
#include "labeldesc/embed_client.hpp"
#include "labeldesc/io.hpp"
#include "labeldesc/mace.hpp"
#include "labeldesc/metrics.hpp"
#include "labeldesc/pipeline.hpp"
#include "labeldesc/simulate.hpp"
#include "labeldesc/version.hpp"
#include "labeldesc/zeroshot.hpp"
