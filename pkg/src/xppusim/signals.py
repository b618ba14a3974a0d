"""IO signal name constants shared by control modules, plant and HMI."""

# Cylinder signals
DO_EXTEND = "DO_Extend"
DO_RETRACT = "DO_Retract"
DI_EXTENDED = "DI_Extended"
DI_RETRACTED = "DI_Retracted"

# Gripper signals
DO_GRIP = "DO_Grip"
DI_PRODUCT = "DI_Product"

# Axis signals
AO_REFERENCE = "AO_ReferencePosition"
AI_ACTUAL = "AI_ActualPosition"

# Unit-level inputs
DI_ESTOP = "DI_EStop"

# Stack station inputs
DI_STACK_EMPTY = "DI_StackEmpty"
DI_PICKUP_OCCUPIED = "DI_PickupOccupied"
DI_PICKUP_METAL = "DI_PickupMetal"

# Stamp station inputs
DI_STAMP_OCCUPIED = "DI_StampOccupied"

# Sorting conveyor inputs
DI_BELT_SENSOR = "DI_BeltSensor"
AI_COLOR_CODE = "AI_ColorCode"
DI_RAMP_SENSOR = "DI_RampSensor"  # suffixed with the ramp index

# Color codes reported by the belt entry sensor
COLOR_CODE_NONE = 0.0
COLOR_CODE_WHITE = 1.0
COLOR_CODE_BLACK = 2.0
COLOR_CODE_METALLIC = 3.0
