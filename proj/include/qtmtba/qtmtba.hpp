#ifndef QTMTBA_QTMTBA_HPP
#define QTMTBA_QTMTBA_HPP

#include "check_report.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "excitation.hpp"
#include "free_energy.hpp"
#include "free_fermion.hpp"
#include "qtm_engine.hpp"
#include "rational_ts.hpp"
#include "tba_numerics.hpp"

#endif
