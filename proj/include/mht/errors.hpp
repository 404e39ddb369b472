#pragma once

#include <stdexcept>
#include <string>

namespace mht {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MHT_DEFINE_ERROR(Name)                 \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

// volume
MHT_DEFINE_ERROR(OutOfBounds);
MHT_DEFINE_ERROR(ParseError);
MHT_DEFINE_ERROR(IoError);
MHT_DEFINE_ERROR(UnsupportedElementType);
MHT_DEFINE_ERROR(InvalidArgument);
// template / fitting
MHT_DEFINE_ERROR(DegenerateStencil);
MHT_DEFINE_ERROR(SingularDesign);
MHT_DEFINE_ERROR(FitFailed);
MHT_DEFINE_ERROR(NonpositiveStd);
// hypothesis / tracker
MHT_DEFINE_ERROR(EmptyHypothesisSet);
MHT_DEFINE_ERROR(SeedFitFailed);
// baseline / phantom / eval
MHT_DEFINE_ERROR(SeedPredicateFailed);
MHT_DEFINE_ERROR(DoesNotFit);
MHT_DEFINE_ERROR(EmptyCenterline);

#undef MHT_DEFINE_ERROR

}  // namespace mht
