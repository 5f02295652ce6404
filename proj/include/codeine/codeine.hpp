#pragma once

// Everything except the websocket bridge, which needs OpenSSL.

#include "codeine/attribute_value.hpp"
#include "codeine/bench.hpp"
#include "codeine/connection.hpp"
#include "codeine/domain.hpp"
#include "codeine/driver.hpp"
#include "codeine/error.hpp"
#include "codeine/filter.hpp"
#include "codeine/mediator.hpp"
#include "codeine/pattern.hpp"
#include "codeine/port.hpp"
#include "codeine/program.hpp"
#include "codeine/programs.hpp"
#include "codeine/solver.hpp"
#include "codeine/trace_event.hpp"
#include "codeine/xml.hpp"
