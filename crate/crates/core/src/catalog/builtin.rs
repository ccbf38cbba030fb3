//! The builtin agricultural constellation schema: five fact tables sharing
//! 22 dimension tables.

use super::{AttributeDef, AttributeKind, Catalog, TableDef, TableRole};

/// The builtin catalog in canonical serialized form.
pub const BUILTIN_CATALOG_JSON: &str = include_str!("../../data/builtin_catalog.json");

const VERSION: &str = "agridw-builtin-1";

// Attribute specs are "Name[:kind[:unit]]". Kinds: nk natural-key-part,
// num number, date, time, pt geo-point, poly geo-polygon, enum; the default
// is text. Natural-key parts are non-nullable and form the natural key in
// listed order; everything else is nullable.
const DIMENSIONS: &[(&str, &[&str])] = &[
    ("Business", &["BusinessID:nk", "Name:nk", "Address", "Phone", "Email"]),
    (
        "Crop",
        &[
            "CropID:nk", "CropName:nk", "VarietyID", "VarietyName", "EstYield:num:ton/ha",
            "SeasonStart:date", "SeasonEnd:date", "BbchScale:num", "ScienName",
            "HarvestEquipment", "EquWeight:num",
        ],
    ),
    (
        "CropState",
        &[
            "CropStateID:nk", "CropID", "StageScale:num", "Height:num", "MajorStage",
            "MinStage", "MaxStage", "Diameter:num", "AveHeight:num", "CoveragePercent:num",
        ],
    ),
    ("Farmer", &["FarmerID:nk", "Name:nk", "Address", "Phone", "Mobile", "Email"]),
    (
        "Fertiliser",
        &["FertiliserID:nk", "Name:nk", "Unit", "Status:enum", "Description", "GroupName"],
    ),
    (
        "Field",
        &[
            "FieldID:nk", "FieldName:nk", "SiteID", "Reference", "Block", "Area:num", "AreaUnit",
            "WorkingArea:num", "WorkingAreaUnit", "Latitude:num", "Longitude:num",
            "GeometricPoints:poly", "FieldImage", "Notes",
        ],
    ),
    (
        "Inspection",
        &[
            "InspectionID:nk", "CropID", "Description", "ProblemType:enum", "Severity:enum",
            "AreaValue:num", "AreaUnit", "Order", "Date:date", "Notes", "GrowthStage",
        ],
    ),
    ("Nutrient", &["NutrientID:nk", "NutrientName:nk", "Date:date", "Quantity:num"]),
    (
        "OperationTime",
        &["OperationTimeID:nk", "StartDate:date", "EndDate:date", "Season:enum"],
    ),
    (
        "Pest",
        &[
            "PestID:nk", "CommonName", "ScientificName", "PestType:enum", "Description",
            "Density:num", "MinStage", "MaxStage", "Coverage:num", "CoverageUnit",
        ],
    ),
    (
        "Plan",
        &[
            "PlanID:nk", "PlanName:nk", "RegisNo", "ProductName", "ProductRate:num", "Date:date",
            "WaterVolume:num:l/ha",
        ],
    ),
    ("Product", &["ProductID:nk", "ProductName:nk", "GroupName"]),
    (
        "Spray",
        &[
            "SprayID:nk", "SprayProductName", "ProductRate:num", "Area:num",
            "WaterVolume:num:l/ha", "ConfDuration:num", "ConfWindSpeed:num", "ConfDirection",
            "ConfHumidity:num", "ConfTemp:num", "ActivityType:enum",
        ],
    ),
    (
        "Site",
        &["SiteID:nk", "FarmerID", "SiteName:nk", "Reference", "Address", "GPS:pt", "CreatedBy"],
    ),
    (
        "Soil",
        &[
            "SoilID:nk", "NutrientID", "PH:num:pH", "Nitrogen:num:mg/l", "Phosphorus:num:mg/l",
            "Potassium:num:mg/l", "Magnesium:num:mg/l", "Calcium:num:mg/l", "CEC:num",
            "Silt:num", "Clay:num", "Sand:num", "SoilTexture:enum", "SoilType:enum",
            "OrganicMatter:num", "TopSoil", "SupSoil", "TestDate:date", "Unit",
        ],
    ),
    ("Supplier", &["SupplierID:nk", "SupplierName:nk", "Address", "Phone", "Email"]),
    (
        "Task",
        &[
            "TaskID:nk", "Desc", "Status:enum", "TaskDate:date", "TaskInterval:num",
            "CompDate:date", "AppCode",
        ],
    ),
    (
        "TransTime",
        &["TransTimeID:nk", "OrderDate:date", "DeliverDate:date", "ReceivedDate:date"],
    ),
    (
        "Treatment",
        &[
            "TreatmentID:nk", "TreatmentName:nk", "FormType", "LotCode", "Rate:num", "ApplCode",
            "LevNo", "Type", "Description", "ApplDesc", "TreatmentComment",
        ],
    ),
    (
        "WeatherReading",
        &[
            "WeatherReadingID:nk", "WeatherStationID", "ReadingDate:date", "ReadingTime:time",
            "AirTemper:num", "Rainfall:num", "SPLite:num", "RelativeHumidity:num",
            "WindSpeed:num", "WindDirection", "SoilTemper:num", "LeafWetness:num",
        ],
    ),
    (
        "WeatherStation",
        &["WeatherStationID:nk", "StationName:nk", "Latitude:num", "Longitude:num", "Region"],
    ),
    (
        "Zone",
        &[
            "ZoneID:nk", "ZoneName:nk", "FieldID", "SoilID", "ZoneType:enum", "Area:num",
            "AreaUnit", "Latitude:num", "Longitude:num", "GeometricPoints:poly", "YieldMap",
            "SatellitePicture", "Notes",
        ],
    ),
];

struct FactSpec {
    name: &'static str,
    /// Store-assigned row identity.
    id: &'static str,
    /// Degenerate (non-measure) attributes carried on the fact row.
    extra: &'static [&'static str],
    refs: &'static [&'static str],
    measures: &'static [(&'static str, Option<&'static str>)],
}

const FACTS: &[FactSpec] = &[
    FactSpec {
        name: "FieldFact",
        id: "FieldFactID",
        extra: &[],
        refs: &[
            "Crop", "CropState", "Field", "Zone", "Soil", "Fertiliser", "Nutrient", "Pest",
            "Treatment", "Spray", "OperationTime", "WeatherStation",
        ],
        measures: &[
            ("YieldValue", Some("ton/ha")),
            ("HerbicideQty", Some("kg/ha")),
            ("InsecticideQty", Some("g/ha")),
            ("FungicideQty", Some("g/ha")),
            ("FertiliserQty", Some("kg/ha")),
            ("WaterVolume", Some("l/ha")),
        ],
    },
    FactSpec {
        name: "Sale",
        id: "SaleID",
        extra: &[],
        refs: &["Business", "Supplier", "Product", "TransTime"],
        measures: &[("Quantity", None), ("UnitPrice", None)],
    },
    FactSpec {
        name: "Order",
        id: "OrderID",
        extra: &[],
        refs: &["Business", "Supplier", "Product", "TransTime"],
        measures: &[("Quantity", None), ("UnitPrice", None)],
    },
    FactSpec {
        name: "Testing",
        id: "TestingID",
        extra: &["TestingType"],
        refs: &["Crop", "Soil", "Nutrient", "OperationTime"],
        measures: &[("TestValue", None)],
    },
    FactSpec {
        name: "ManagementAction",
        id: "ActionID",
        extra: &["ActionType"],
        refs: &["Fertiliser", "Treatment", "Inspection", "Spray", "Task", "Plan"],
        measures: &[("Quantity", None)],
    },
];

fn parse_attribute(spec: &str) -> AttributeDef {
    let mut parts = spec.split(':');
    let name = parts.next().expect("attribute name");
    let kind = match parts.next() {
        None => AttributeKind::Text,
        Some("nk") => AttributeKind::NaturalKeyPart,
        Some("num") => AttributeKind::Number,
        Some("date") => AttributeKind::Date,
        Some("time") => AttributeKind::Time,
        Some("pt") => AttributeKind::GeoPoint,
        Some("poly") => AttributeKind::GeoPolygon,
        Some("enum") => AttributeKind::Enum,
        Some(other) => panic!("unknown attribute kind shorthand {other:?}"),
    };
    let mut attr = AttributeDef::new(name, kind, kind != AttributeKind::NaturalKeyPart);
    if let Some(unit) = parts.next() {
        attr = attr.with_unit(unit);
    }
    attr
}

fn dimension(name: &str, specs: &[&str]) -> TableDef {
    let attributes: Vec<AttributeDef> = specs.iter().map(|s| parse_attribute(s)).collect();
    let natural_key = attributes
        .iter()
        .filter(|a| a.kind == AttributeKind::NaturalKeyPart)
        .map(|a| a.name.clone())
        .collect();
    TableDef {
        name: name.to_string(),
        role: TableRole::Dimension,
        attributes,
        natural_key,
        measures: vec![],
        dimension_refs: vec![],
    }
}

/// Name of the foreign-key attribute a fact uses for `dimension`: the
/// dimension's leading natural-key part.
fn foreign_key_name(dimension: &str) -> String {
    let (_, specs) = DIMENSIONS
        .iter()
        .find(|(n, _)| *n == dimension)
        .expect("fact references a builtin dimension");
    specs[0].split(':').next().unwrap().to_string()
}

fn fact(spec: &FactSpec) -> TableDef {
    let mut attributes = vec![AttributeDef::new(spec.id, AttributeKind::SurrogateKey, false)];
    attributes.extend(
        spec.extra
            .iter()
            .map(|n| AttributeDef::new(*n, AttributeKind::Enum, true)),
    );
    attributes.extend(
        spec.refs
            .iter()
            .map(|d| AttributeDef::foreign_key(foreign_key_name(d), *d)),
    );
    for (m, unit) in spec.measures {
        let mut a = AttributeDef::new(*m, AttributeKind::Number, true);
        if let Some(u) = unit {
            a = a.with_unit(*u);
        }
        attributes.push(a);
    }
    TableDef {
        name: spec.name.to_string(),
        role: TableRole::Fact,
        attributes,
        natural_key: vec![],
        measures: spec.measures.iter().map(|(m, _)| m.to_string()).collect(),
        dimension_refs: spec.refs.iter().map(|r| r.to_string()).collect(),
    }
}

/// The agricultural warehouse schema shipped with the crate.
pub fn builtin_catalog() -> Catalog {
    let tables = DIMENSIONS
        .iter()
        .map(|(name, specs)| dimension(name, specs))
        .chain(FACTS.iter().map(fact));
    Catalog::from_tables(VERSION, tables).expect("builtin table names are unique")
}
