#pragma once

#include "phasecert/error.hpp"
#include "phasecert/matrix_core.hpp"
#include "phasecert/numrange.hpp"
#include "phasecert/block_structure.hpp"
#include "phasecert/lmi.hpp"
#include "phasecert/indices.hpp"
#include "phasecert/lti.hpp"
#include "phasecert/certify.hpp"
#include "phasecert/io.hpp"
