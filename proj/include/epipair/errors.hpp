#pragma once

#include <stdexcept>
#include <string>

namespace epipair {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input/validation problems. The CLI maps these to exit code 2.
struct DataError : Error {
    using Error::Error;
};

struct IoError : DataError {
    using DataError::DataError;
};
struct MalformedGenotype : DataError {
    using DataError::DataError;
};
struct MalformedRow : DataError {
    using DataError::DataError;
};
struct MalformedLabel : DataError {
    using DataError::DataError;
};
struct DuplicatePatient : DataError {
    using DataError::DataError;
};
struct DegenerateCohort : DataError {
    using DataError::DataError;
};
struct InvalidConfig : DataError {
    using DataError::DataError;
};
struct LengthMismatch : DataError {
    using DataError::DataError;
};
struct TooFewPatients : DataError {
    using DataError::DataError;
};
struct EmptyTestSet : DataError {
    using DataError::DataError;
};
struct EmptyResults : DataError {
    using DataError::DataError;
};
struct ZeroBaseline : DataError {
    using DataError::DataError;
};

// Cluster/runtime problems. The CLI maps these to exit code 3.
struct ClusterError : Error {
    using Error::Error;
};

struct ConnectionRefused : ClusterError {
    using ClusterError::ClusterError;
};
struct VersionMismatch : ClusterError {
    using ClusterError::ClusterError;
};
struct WorkerLost : ClusterError {
    using ClusterError::ClusterError;
};
struct Timeout : ClusterError {
    using ClusterError::ClusterError;
};
struct ProtocolError : ClusterError {
    using ClusterError::ClusterError;
};

} // namespace epipair
