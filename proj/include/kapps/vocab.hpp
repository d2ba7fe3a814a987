#pragma once
// IRI constants for the vocabularies the runtime interprets directly.

#include <string>

namespace kapps::vocab {

inline const std::string kRdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline const std::string kRdfs = "http://www.w3.org/2000/01/rdf-schema#";
inline const std::string kXsd = "http://www.w3.org/2001/XMLSchema#";
inline const std::string kOwl = "http://www.w3.org/2002/07/owl#";
inline const std::string kSh = "http://www.w3.org/ns/shacl#";
inline const std::string kProv = "http://www.w3.org/ns/prov#";
inline const std::string kRdf4j = "http://rdf4j.org/schema/rdf4j#";
inline const std::string kRdf4jSh = "http://rdf4j.org/shacl-extensions#";

inline const std::string kCfc = "http://w3id.org/circularfactory/Core#";
inline const std::string kSvc = "http://w3id.org/circularfactory/Service#";
inline const std::string kFc = "http://w3id.org/circularfactory/FlexConveyor#";
inline const std::string kFci =
    "http://w3id.org/circularfactory/FlexConveyorInstances#";
inline const std::string kUc = "http://w3id.org/circularfactory/Unscrewing#";
inline const std::string kEx = "http://example.org/circularfactory/";

inline const std::string kDefaultGraph = "urn:kapps:default";
inline const std::string kShapesGraph = "urn:kapps:shapes";
inline const std::string kOntologyGraph = "urn:kapps:ontology";

namespace rdf {
inline const std::string type = kRdf + "type";
inline const std::string langString = kRdf + "langString";
}  // namespace rdf

namespace rdfs {
inline const std::string subClassOf = kRdfs + "subClassOf";
inline const std::string domain = kRdfs + "domain";
inline const std::string range = kRdfs + "range";
inline const std::string Class = kRdfs + "Class";
inline const std::string label = kRdfs + "label";
inline const std::string comment = kRdfs + "comment";
}  // namespace rdfs

namespace xsd {
inline const std::string string = kXsd + "string";
inline const std::string integer = kXsd + "integer";
inline const std::string boolean = kXsd + "boolean";
inline const std::string double_ = kXsd + "double";
inline const std::string float_ = kXsd + "float";
inline const std::string decimal = kXsd + "decimal";
inline const std::string dateTime = kXsd + "dateTime";
inline const std::string anyURI = kXsd + "anyURI";
}  // namespace xsd

namespace owl {
inline const std::string Class = kOwl + "Class";
inline const std::string ObjectProperty = kOwl + "ObjectProperty";
inline const std::string DatatypeProperty = kOwl + "DatatypeProperty";
inline const std::string FunctionalProperty = kOwl + "FunctionalProperty";
inline const std::string Restriction = kOwl + "Restriction";
inline const std::string onProperty = kOwl + "onProperty";
inline const std::string maxCardinality = kOwl + "maxCardinality";
inline const std::string minCardinality = kOwl + "minCardinality";
inline const std::string cardinality = kOwl + "cardinality";
inline const std::string maxQualifiedCardinality = kOwl + "maxQualifiedCardinality";
inline const std::string minQualifiedCardinality = kOwl + "minQualifiedCardinality";
inline const std::string qualifiedCardinality = kOwl + "qualifiedCardinality";
inline const std::string someValuesFrom = kOwl + "someValuesFrom";
inline const std::string allValuesFrom = kOwl + "allValuesFrom";
inline const std::string onClass = kOwl + "onClass";
inline const std::string onDataRange = kOwl + "onDataRange";
inline const std::string inverseOf = kOwl + "inverseOf";
inline const std::string Thing = kOwl + "Thing";
}  // namespace owl

namespace sh {
inline const std::string NodeShape = kSh + "NodeShape";
inline const std::string PropertyShape = kSh + "PropertyShape";
inline const std::string ValidationReport = kSh + "ValidationReport";
inline const std::string ValidationResult = kSh + "ValidationResult";
inline const std::string conforms = kSh + "conforms";
inline const std::string result = kSh + "result";
inline const std::string focusNode = kSh + "focusNode";
inline const std::string resultPath = kSh + "resultPath";
inline const std::string value = kSh + "value";
inline const std::string sourceConstraintComponent = kSh + "sourceConstraintComponent";
inline const std::string sourceShape = kSh + "sourceShape";
inline const std::string resultSeverity = kSh + "resultSeverity";
inline const std::string resultMessage = kSh + "resultMessage";
inline const std::string targetClass = kSh + "targetClass";
inline const std::string property = kSh + "property";
inline const std::string path = kSh + "path";
inline const std::string maxCount = kSh + "maxCount";
inline const std::string minCount = kSh + "minCount";
inline const std::string datatype = kSh + "datatype";
inline const std::string class_ = kSh + "class";
inline const std::string nodeKind = kSh + "nodeKind";
inline const std::string message = kSh + "message";
inline const std::string severity = kSh + "severity";
inline const std::string sparql = kSh + "sparql";
inline const std::string select = kSh + "select";
inline const std::string prefixes = kSh + "prefixes";
inline const std::string declare = kSh + "declare";
inline const std::string prefix = kSh + "prefix";
inline const std::string namespace_ = kSh + "namespace";
inline const std::string name = kSh + "name";
inline const std::string description = kSh + "description";
inline const std::string deactivated = kSh + "deactivated";
inline const std::string Violation = kSh + "Violation";
inline const std::string Warning = kSh + "Warning";
inline const std::string Info = kSh + "Info";
inline const std::string IRI = kSh + "IRI";
inline const std::string BlankNode = kSh + "BlankNode";
inline const std::string Literal = kSh + "Literal";
inline const std::string BlankNodeOrIRI = kSh + "BlankNodeOrIRI";
inline const std::string BlankNodeOrLiteral = kSh + "BlankNodeOrLiteral";
inline const std::string IRIOrLiteral = kSh + "IRIOrLiteral";
inline const std::string MaxCountConstraintComponent = kSh + "MaxCountConstraintComponent";
inline const std::string MinCountConstraintComponent = kSh + "MinCountConstraintComponent";
inline const std::string DatatypeConstraintComponent = kSh + "DatatypeConstraintComponent";
inline const std::string ClassConstraintComponent = kSh + "ClassConstraintComponent";
inline const std::string NodeKindConstraintComponent = kSh + "NodeKindConstraintComponent";
inline const std::string SPARQLConstraintComponent = kSh + "SPARQLConstraintComponent";
}  // namespace sh

namespace prov {
inline const std::string Activity = kProv + "Activity";
inline const std::string wasAssociatedWith = kProv + "wasAssociatedWith";
inline const std::string endedAtTime = kProv + "endedAtTime";
inline const std::string wasGeneratedBy = kProv + "wasGeneratedBy";
inline const std::string influenced = kProv + "influenced";
}  // namespace prov

}  // namespace kapps::vocab
