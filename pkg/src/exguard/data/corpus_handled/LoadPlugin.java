public class LoadPlugin {
    public static void main(String[] args) {
        String name = args[0];
        try {
            Class<?> plugin = Class.forName(name);
        } catch (ClassNotFoundException ex) {
            System.err.println("Class not loadable: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("loaded " + plugin.getName());
    }
}
