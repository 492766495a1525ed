from django.apps import AppConfig


class InstanceAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.instance_app'
