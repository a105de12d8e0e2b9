import math

from rest_framework import serializers

from layer.conf import solver_settings

FAMILY_FIELDS = {
    'rectangle': {'required': ['origin', 'edge_u', 'edge_v'], 'optional': []},
    'disk': {'required': ['center', 'radius'], 'optional': ['normal']},
    'cap': {'required': ['center', 'radius', 'polar_angle'], 'optional': ['axis']},
    'mesh': {'required': ['path'], 'optional': []},
}
SHARED_SURFACE_FIELDS = ['family', 'anchor', 'delta', 'deltas', 'seed_from_previous']


class VectorField(serializers.Field):
    """Three comma-separated floats."""
    default_error_messages = {
        'invalid': 'Expected three comma-separated numbers.',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part for part in data.split(',') if part.strip()]
        try:
            values = tuple(float(part) for part in data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if len(values) != 3 or not all(math.isfinite(v) for v in values):
            self.fail('invalid')
        return values

    def to_representation(self, value):
        return [float(v) for v in value]


class FloatListField(serializers.Field):
    default_error_messages = {
        'invalid': 'Expected a comma-separated list of numbers.',
        'empty': 'The list must not be empty.',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part for part in data.split(',') if part.strip()]
        try:
            values = tuple(float(part) for part in data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not values:
            self.fail('empty')
        return values

    def to_representation(self, value):
        return [float(v) for v in value]


class StrictSerializer(serializers.Serializer):
    """Rejects keys it does not declare."""

    def to_internal_value(self, data):
        unknown = [key for key in data if key not in self.fields]
        if unknown:
            raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
        return super().to_internal_value(data)


class RunSerializer(StrictSerializer):
    mode = serializers.ChoiceField(choices=['eigenvalues', 'pole', 'sweep', 'validate'])
    l = serializers.IntegerField(min_value=1, required=False)
    n_range = serializers.IntegerField(min_value=1, default=10)
    seed_re = serializers.FloatField(required=False)
    seed_im = serializers.FloatField(required=False)

    def validate(self, data):
        if data['mode'] in ('pole', 'sweep') and 'l' not in data:
            raise serializers.ValidationError({'l': [f"Mode {data['mode']} needs the level index l."]})
        if ('seed_re' in data) != ('seed_im' in data):
            raise serializers.ValidationError({'seed_im': ['seed_re and seed_im go together.']})
        return data


class ParamsSerializer(StrictSerializer):
    alpha = serializers.FloatField()
    beta = serializers.FloatField()

    def validate_beta(self, value):
        if value == 0:
            raise serializers.ValidationError('beta must be non-zero.')
        return value


class SurfaceSerializer(StrictSerializer):
    family = serializers.ChoiceField(choices=sorted(FAMILY_FIELDS))
    center = VectorField(required=False)
    radius = serializers.FloatField(required=False)
    normal = VectorField(required=False)
    axis = VectorField(required=False)
    polar_angle = serializers.FloatField(required=False)
    origin = VectorField(required=False)
    edge_u = VectorField(required=False)
    edge_v = VectorField(required=False)
    path = serializers.CharField(required=False)
    anchor = VectorField(required=False)
    delta = serializers.FloatField(default=1.0)
    deltas = FloatListField(required=False)
    seed_from_previous = serializers.BooleanField(default=False)

    def validate_delta(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('delta must lie in (0, 1].')
        return value

    def validate_deltas(self, value):
        if any(not 0 < v <= 1 for v in value):
            raise serializers.ValidationError('every delta must lie in (0, 1].')
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError('deltas must be strictly increasing.')
        return value

    def validate(self, data):
        family = FAMILY_FIELDS[data['family']]
        errors = {}
        for key in family['required']:
            if key not in data:
                errors[key] = [f"Required for family {data['family']}."]
        allowed = set(family['required'] + family['optional'] + SHARED_SURFACE_FIELDS)
        for key in data:
            if key not in allowed:
                errors[key] = [f"Not used by family {data['family']}."]
        if errors:
            raise serializers.ValidationError(errors)
        return data


class NumericsSerializer(StrictSerializer):
    quad_order = serializers.IntegerField(min_value=2, required=False)
    tail_tol = serializers.FloatField(required=False)
    root_tol = serializers.FloatField(min_value=1e-12, required=False)
    n_max = serializers.IntegerField(min_value=2, required=False)
    threads = serializers.IntegerField(min_value=1, required=False)
    neumann_terms = serializers.IntegerField(min_value=1, default=1)
    bilinear_closed_form = serializers.BooleanField(default=False)

    def validate_tail_tol(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('tail_tol must lie in (0, 1).')
        return value

    def validate(self, data):
        data.setdefault('quad_order', solver_settings.QUAD_ORDER)
        data.setdefault('tail_tol', solver_settings.TAIL_TOL)
        data.setdefault('root_tol', solver_settings.ROOT_TOL)
        data.setdefault('threads', solver_settings.THREADS)
        data.setdefault('n_max', None)
        return data


class OutputSerializer(StrictSerializer):
    path = serializers.CharField(default='layer.csv')
    format = serializers.ChoiceField(choices=['csv', 'json'], default='csv')
    emit_plot_script = serializers.BooleanField(default=False)


class EigenvalueSerializer(serializers.Serializer):
    n = serializers.IntegerField()
    energy = serializers.FloatField()
    classification = serializers.CharField()
    window = serializers.IntegerField(allow_null=True)


class PoleResultSerializer(serializers.Serializer):
    l = serializers.IntegerField()
    k = serializers.IntegerField()
    delta = serializers.FloatField()
    re_z = serializers.SerializerMethodField()
    im_z = serializers.SerializerMethodField()
    re_mu = serializers.SerializerMethodField()
    im_mu = serializers.SerializerMethodField()
    width = serializers.FloatField()
    residual = serializers.FloatField()
    iterations = serializers.IntegerField()
    method = serializers.CharField()
    condition_free = serializers.FloatField()
    condition_inner = serializers.FloatField()
    n_max = serializers.IntegerField()

    def get_re_z(self, pole):
        return pole.z.real

    def get_im_z(self, pole):
        return pole.z.imag

    def get_re_mu(self, pole):
        return pole.mu.real

    def get_im_mu(self, pole):
        return pole.mu.imag


class SweepPointSerializer(serializers.Serializer):
    delta = serializers.FloatField()
    re_z = serializers.SerializerMethodField()
    im_z = serializers.SerializerMethodField()
    re_mu = serializers.SerializerMethodField()
    im_mu = serializers.SerializerMethodField()
    im_mu_closed_form = serializers.FloatField(source='closed_form_im', allow_null=True)
    residual = serializers.SerializerMethodField()
    iterations = serializers.SerializerMethodField()
    status = serializers.CharField()
    width = serializers.SerializerMethodField()

    def _pole_value(self, point, getter):
        return getter(point.pole) if point.pole is not None else None

    def get_re_z(self, point):
        return self._pole_value(point, lambda pole: pole.z.real)

    def get_im_z(self, point):
        return self._pole_value(point, lambda pole: pole.z.imag)

    def get_re_mu(self, point):
        return self._pole_value(point, lambda pole: pole.mu.real)

    def get_im_mu(self, point):
        return self._pole_value(point, lambda pole: pole.mu.imag)

    def get_residual(self, point):
        return self._pole_value(point, lambda pole: pole.residual)

    def get_iterations(self, point):
        return self._pole_value(point, lambda pole: pole.iterations)

    def get_width(self, point):
        return self._pole_value(point, lambda pole: pole.width)


class PowerLawFitSerializer(serializers.Serializer):
    exponent = serializers.FloatField()
    prefactor = serializers.FloatField()
    r_squared = serializers.FloatField()


class CheckResultSerializer(serializers.Serializer):
    name = serializers.CharField()
    status = serializers.SerializerMethodField()
    error = serializers.SerializerMethodField()
    bound = serializers.FloatField()
    message = serializers.CharField()

    def get_status(self, result):
        return 'PASS' if result.passed else 'FAIL'

    def get_error(self, result):
        return result.error if math.isfinite(result.error) else None
